"""GRU cell, feed-forward blocks, SGD update, and the gradient checker."""

import numpy as np
import pytest

from deskmt import tensor as T
from deskmt.errors import NonFiniteGradientError, ShapeError
from deskmt.layers import (Feedforward2Params, GruParams, ParameterStore,
                           feedforward2, grad_check, gru_step, sgd_update)
from deskmt.tensor import Tensor


def make_gru(input_size=3, hidden=4, seed=0, zero=False):
    store = ParameterStore()
    rng = np.random.default_rng(seed)
    p = GruParams.create(store, "g", input_size, hidden, rng)
    if zero:
        for t in store.tensors():
            t.data[...] = 0.0
    return store, p


def reference_gru(p, x, h_prev):
    """Independent single-step evaluation straight from the gate formulas."""
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    z = sig(x @ p.w_z.data + h_prev @ p.u_z.data + p.b_z.data)
    r = sig(x @ p.w_r.data + h_prev @ p.u_r.data + p.b_r.data)
    h_tilde = np.tanh(x @ p.w_h.data + (r * h_prev) @ p.u_h.data + p.b_h.data)
    return (1 - z) * h_prev + z * h_tilde


class TestGruStep:
    def test_zero_params_zero_state_gives_zero(self):
        _, p = make_gru(zero=True)
        x = Tensor(np.random.default_rng(1).standard_normal((2, 3)))
        h = Tensor(np.zeros((2, 4)))
        out = gru_step(p, x, h)
        np.testing.assert_allclose(out.data, 0.0)

    def test_zero_params_halves_previous_state(self):
        # z = sigmoid(0) = 0.5 and the candidate is zero
        _, p = make_gru(zero=True)
        rng = np.random.default_rng(2)
        h = Tensor(rng.standard_normal((2, 4)))
        out = gru_step(p, Tensor(rng.standard_normal((2, 3))), h)
        np.testing.assert_allclose(out.data, 0.5 * h.data)

    def test_matches_independent_formula(self):
        _, p = make_gru(seed=3)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((5, 3))
        h = rng.standard_normal((5, 4))
        out = gru_step(p, Tensor(x), Tensor(h))
        np.testing.assert_allclose(out.data, reference_gru(p, x, h), atol=1e-10)

    def test_output_in_convex_hull_of_state_and_candidate(self):
        _, p = make_gru(seed=5)
        rng = np.random.default_rng(6)
        for _ in range(10):
            x = rng.standard_normal((1, 3))
            h = rng.standard_normal((1, 4))
            sig = lambda v: 1.0 / (1.0 + np.exp(-v))
            r = sig(x @ p.w_r.data + h @ p.u_r.data + p.b_r.data)
            h_tilde = np.tanh(x @ p.w_h.data + (r * h) @ p.u_h.data + p.b_h.data)
            out = gru_step(p, Tensor(x), Tensor(h)).data
            lo = np.minimum(h, h_tilde) - 1e-12
            hi = np.maximum(h, h_tilde) + 1e-12
            assert ((out >= lo) & (out <= hi)).all()

    def test_dimension_mismatch(self):
        _, p = make_gru()
        with pytest.raises(ShapeError):
            gru_step(p, Tensor(np.zeros((2, 7))), Tensor(np.zeros((2, 4))))

    def test_backward_matches_finite_differences(self):
        store, p = make_gru(seed=7)
        rng = np.random.default_rng(8)
        x = rng.standard_normal((3, 3))
        h = rng.standard_normal((3, 4))
        def loss():
            return T.nll_loss(gru_step(p, Tensor(x), Tensor(h)), np.array([0, 1, 2]))
        assert grad_check(loss, store, eps=1e-5) < 1e-6


class TestFeedforward2:
    def test_zero_params_zero_output(self):
        store = ParameterStore()
        p = Feedforward2Params.create(store, "f", 3, 5, 2, np.random.default_rng(0))
        for t in store.tensors():
            t.data[...] = 0.0
        out = feedforward2(p, Tensor(np.ones((4, 3))))
        np.testing.assert_allclose(out.data, 0.0)

    def test_identity_like_layers_track_input_within_tanh_curvature(self):
        store = ParameterStore()
        p = Feedforward2Params.create(store, "f", 3, 3, 3, np.random.default_rng(0))
        p.w1.data = np.eye(3)
        p.b1.data[...] = 0.0
        p.w2.data = np.eye(3)
        p.b2.data[...] = 0.0
        x = np.array([[0.01, -0.02, 0.03]])
        out = feedforward2(p, Tensor(x))
        np.testing.assert_allclose(out.data, np.tanh(x), atol=1e-12)
        np.testing.assert_allclose(out.data, x, atol=1e-5)

    def test_matches_independent_evaluation(self):
        store = ParameterStore()
        p = Feedforward2Params.create(store, "f", 4, 6, 2, np.random.default_rng(1))
        x = np.random.default_rng(2).standard_normal((5, 4))
        expected = np.tanh(x @ p.w1.data + p.b1.data) @ p.w2.data + p.b2.data
        np.testing.assert_allclose(feedforward2(p, Tensor(x)).data, expected, atol=1e-10)

    def test_backward_matches_finite_differences(self):
        store = ParameterStore()
        p = Feedforward2Params.create(store, "f", 4, 6, 3, np.random.default_rng(3))
        x = np.random.default_rng(4).standard_normal((2, 4))
        def loss():
            return T.nll_loss(feedforward2(p, Tensor(x)), np.array([0, 2]))
        assert grad_check(loss, store, eps=1e-5) < 1e-6


class TestSgdUpdate:
    def test_zero_gradients_leave_params_unchanged(self):
        store, _ = make_gru(seed=9)
        before = {k: v.copy() for k, v in store.state_arrays().items()}
        sgd_update(store, lr=0.5, clip_norm=5.0)
        for name, t in store.items():
            np.testing.assert_array_equal(t.data, before[name])

    def test_scalar_step_arithmetic(self):
        store = ParameterStore()
        theta = store.register("theta", np.array([1.0]))
        theta.grad[...] = 2.0
        sgd_update(store, lr=0.1, clip_norm=None)
        np.testing.assert_allclose(theta.data, [0.8])
        np.testing.assert_allclose(theta.grad, [0.0])

    def test_clipping_halves_an_oversized_gradient(self):
        store = ParameterStore()
        theta = store.register("theta", np.zeros(4))
        theta.grad[...] = 5.0  # norm 10
        sgd_update(store, lr=1.0, clip_norm=5.0)
        np.testing.assert_allclose(theta.data, -2.5 * np.ones(4))

    def test_lr_zero_is_identity(self):
        store, _ = make_gru(seed=10)
        for t in store.tensors():
            t.grad[...] = np.random.default_rng(11).standard_normal(t.data.shape)
        before = {k: v.copy() for k, v in store.state_arrays().items()}
        sgd_update(store, lr=0.0)
        for name, t in store.items():
            np.testing.assert_array_equal(t.data, before[name])

    def test_non_finite_gradient_aborts_with_diagnostics(self):
        store = ParameterStore()
        a = store.register("fine", np.zeros(2))
        b = store.register("broken", np.zeros(2))
        b.grad[0] = np.nan
        before = a.data.copy()
        with pytest.raises(NonFiniteGradientError, match="broken"):
            sgd_update(store, lr=0.1)
        np.testing.assert_array_equal(a.data, before)


class TestGradCheck:
    def test_linear_loss_is_exact(self):
        store = ParameterStore()
        theta = store.register("theta", np.array([2.0, -1.0]))
        def loss():
            return T.affine(T.add(T.affine(theta, 3.0), T.constant(np.zeros(2))), 1.0)
        # affine chain is linear, so central differences are exact
        def scalar_loss():
            return T.nll_loss(T.reshape(T.affine(theta, 3.0), (1, 2)), np.array([0]))
        assert grad_check(scalar_loss, store, eps=1e-5) < 1e-7

    def test_detects_a_doubled_gradient(self):
        store = ParameterStore()
        theta = store.register("theta", np.array([[0.3, -0.2]]))

        class Doubled(Tensor):
            pass

        def loss():
            base = T.nll_loss(theta, np.array([0]))
            # wrap so backward deposits twice the true gradient
            def bwd(g):
                return ((base, 2.0 * g),)
            return Tensor(base.data, parents=(base,), backward=bwd)

        err = grad_check(loss, store, eps=1e-6)
        assert abs(err - 0.5) < 1e-3
