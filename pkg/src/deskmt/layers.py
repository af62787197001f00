"""Trainable building blocks: parameter store, GRU cell, two-layer nets.

Weights are initialized uniform(-0.08, 0.08) and biases zero, from the
run's seeded generator, so two runs with the same seed produce identical
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .errors import NonFiniteGradientError, ShapeError
from .tensor import Tensor

INIT_SCALE = 0.08


class ParameterStore:
    """Ordered registry of named leaf tensors with gradient buffers."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def register(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} registered twice")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def weight(self, name: str, shape: tuple, rng: np.random.Generator) -> Tensor:
        return self.register(name, rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape))

    def bias(self, name: str, width: int) -> Tensor:
        return self.register(name, np.zeros(width))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grads(self):
        for t in self._params.values():
            t.zero_grad()

    def grad_norm(self) -> float:
        total = 0.0
        for t in self._params.values():
            total += float((t.grad * t.grad).sum())
        return float(np.sqrt(total))

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._params.items()}

    def load_state(self, arrays: dict[str, np.ndarray]):
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise ShapeError(f"parameter set mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, t in self._params.items():
            a = np.asarray(arrays[name], dtype=np.float64)
            if a.shape != t.data.shape:
                raise ShapeError(f"parameter {name}: shape {a.shape} != {t.data.shape}")
            t.data = a.copy()


@dataclass
class GruParams:
    """Gate parameters of one gated recurrent unit."""

    w_z: Tensor
    w_r: Tensor
    w_h: Tensor
    u_z: Tensor
    u_r: Tensor
    u_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor
    hidden_size: int

    @classmethod
    def create(cls, store: ParameterStore, prefix: str, input_size: int,
               hidden_size: int, rng: np.random.Generator) -> "GruParams":
        w = lambda gate, shape: store.weight(f"{prefix}.{gate}", shape, rng)
        return cls(
            w_z=w("w_z", (input_size, hidden_size)),
            w_r=w("w_r", (input_size, hidden_size)),
            w_h=w("w_h", (input_size, hidden_size)),
            u_z=w("u_z", (hidden_size, hidden_size)),
            u_r=w("u_r", (hidden_size, hidden_size)),
            u_h=w("u_h", (hidden_size, hidden_size)),
            b_z=store.bias(f"{prefix}.b_z", hidden_size),
            b_r=store.bias(f"{prefix}.b_r", hidden_size),
            b_h=store.bias(f"{prefix}.b_h", hidden_size),
            hidden_size=hidden_size,
        )


def gru_step(p: GruParams, x_t: Tensor, h_prev: Tensor) -> Tensor:
    """One GRU transition.

    z = sigmoid(W_z x + U_z h + b_z), r likewise, candidate
    h~ = tanh(W_h x + U_h (r*h) + b_h), output (1-z)*h + z*h~.
    """
    if x_t.data.shape[-1] != p.w_z.data.shape[0]:
        raise ShapeError(f"gru_step: input width {x_t.data.shape[-1]} != {p.w_z.data.shape[0]}")
    if h_prev.data.shape[-1] != p.hidden_size:
        raise ShapeError(f"gru_step: state width {h_prev.data.shape[-1]} != {p.hidden_size}")
    z = T.sigmoid(T.linear2(x_t, p.w_z, h_prev, p.u_z, p.b_z))
    r = T.sigmoid(T.linear2(x_t, p.w_r, h_prev, p.u_r, p.b_r))
    h_tilde = T.tanh(T.linear2(x_t, p.w_h, T.mul(r, h_prev), p.u_h, p.b_h))
    return T.gru_mix(z, h_prev, h_tilde)


@dataclass
class Feedforward2Params:
    """Two dense layers with a tanh in between."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    hidden_width: int
    nonlinearity: str = "tanh"

    @classmethod
    def create(cls, store: ParameterStore, prefix: str, input_size: int,
               hidden_width: int, output_size: int,
               rng: np.random.Generator) -> "Feedforward2Params":
        return cls(
            w1=store.weight(f"{prefix}.w1", (input_size, hidden_width), rng),
            b1=store.bias(f"{prefix}.b1", hidden_width),
            w2=store.weight(f"{prefix}.w2", (hidden_width, output_size), rng),
            b2=store.bias(f"{prefix}.b2", output_size),
            hidden_width=hidden_width,
        )


def feedforward2(p: Feedforward2Params, inputs: Tensor) -> Tensor:
    if p.nonlinearity != "tanh":
        raise ValueError(f"unsupported nonlinearity {p.nonlinearity!r}")
    if inputs.data.shape[-1] != p.w1.data.shape[0]:
        raise ShapeError(f"feedforward2: input width {inputs.data.shape[-1]} != {p.w1.data.shape[0]}")
    return T.linear(T.tanh(T.linear(inputs, p.w1, p.b1)), p.w2, p.b2)


def sgd_update(store: ParameterStore, lr: float, clip_norm: float | None = 5.0):
    """Clip gradients by global norm, take one SGD step, zero the grads.

    Raises NonFiniteGradientError (naming the offending tensors) before
    touching any parameter if a gradient contains NaN/Inf.
    """
    bad = [name for name, t in store.items() if not np.isfinite(t.grad).all()]
    if bad:
        raise NonFiniteGradientError(f"non-finite gradients in: {', '.join(bad)}")
    scale = 1.0
    if clip_norm:
        norm = store.grad_norm()
        if norm > clip_norm:
            scale = clip_norm / norm
    for t in store.tensors():
        t.data -= (lr * scale) * t.grad
    store.zero_grads()


def grad_check(loss_fn: Callable[[], Tensor], store: ParameterStore,
               eps: float = 1e-5) -> float:
    """Compare analytic gradients with central finite differences.

    Returns max over all parameter components of
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    store.zero_grads()
    loss_fn().backward()
    analytic = {name: t.grad.copy() for name, t in store.items()}
    store.zero_grads()

    worst = 0.0
    for name, t in store.items():
        flat = t.data.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn().item()
            flat[i] = orig - eps
            down = loss_fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    return worst
