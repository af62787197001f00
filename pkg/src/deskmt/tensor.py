"""Reverse-mode automatic differentiation over dense float64 arrays.

This is not a general autodiff framework: it provides exactly the
operations the recurrent translation model needs (affine maps, gate
nonlinearities, embedding lookup, masked softmax, attention mixing and
negative log-likelihood), each with a hand-written backward rule.
Values are plain numpy arrays; a Tensor couples a value with a gradient
accumulator and a closure that routes upstream gradients to its parents.
"""

from __future__ import annotations

import numpy as np

from .errors import FullyMaskedError, ShapeError

Array = np.ndarray


def _as_f64(x) -> Array:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    """A node in the computation graph.

    Leaf tensors (parameters) are created with ``requires_grad=True`` and
    keep their ``grad`` buffer across backward passes so gradients
    accumulate until explicitly zeroed. Interior nodes get a transient
    grad during ``backward`` only.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=None):
        self.data = _as_f64(data)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad and backward is None else None
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = self.name or ("leaf" if self._backward is None else "node")
        return f"Tensor({tag}, shape={self.data.shape})"

    def backward(self):
        """Propagate d(self)/d(leaf) into every reachable leaf's grad."""
        if self.data.size != 1:
            raise ShapeError("backward() expects a scalar root")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, Array] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad += g
                continue
            for parent, pg in node._backward(g):
                if pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    # backward rules may hand out views of g, so never
                    # accumulate in place
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _unbroadcast(g: Array, shape: tuple) -> Array:
    """Sum gradient g down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def constant(data) -> Tensor:
    return Tensor(_as_f64(data))


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data
    def bwd(g):
        return ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(g, b.data.shape)))
    return Tensor(out_data, parents=(a, b), backward=bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data
    def bwd(g):
        return ((a, _unbroadcast(g * b.data, a.data.shape)),
                (b, _unbroadcast(g * a.data, b.data.shape)))
    return Tensor(out_data, parents=(a, b), backward=bwd)


def affine(a: Tensor, scale: float = 1.0, shift: float = 0.0) -> Tensor:
    out_data = a.data * scale + shift
    def bwd(g):
        return ((a, g * scale),)
    return Tensor(out_data, parents=(a,), backward=bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data
    def bwd(g):
        return ((a, g @ b.data.T), (b, a.data.T @ g))
    return Tensor(out_data, parents=(a, b), backward=bwd)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x @ w (+ b). Fused so the bias add does not cost an extra node."""
    if x.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(f"linear: input width {x.data.shape[-1]} != {w.data.shape[0]}")
    out_data = x.data @ w.data
    if b is not None:
        out_data = out_data + b.data
    def bwd(g):
        grads = [(x, g @ w.data.T), (w, x.data.T @ g)]
        if b is not None:
            grads.append((b, g.sum(axis=0) if g.ndim > 1 else g))
        return grads
    parents = (x, w) if b is None else (x, w, b)
    return Tensor(out_data, parents=parents, backward=bwd)


def linear2(x: Tensor, w: Tensor, h: Tensor, u: Tensor, b: Tensor) -> Tensor:
    """x @ w + h @ u + b, the pre-activation of one GRU gate."""
    if x.data.shape[-1] != w.data.shape[0] or h.data.shape[-1] != u.data.shape[0]:
        raise ShapeError(
            f"linear2: x{x.data.shape} @ w{w.data.shape}, h{h.data.shape} @ u{u.data.shape}")
    out_data = x.data @ w.data + h.data @ u.data + b.data
    def bwd(g):
        return ((x, g @ w.data.T), (w, x.data.T @ g),
                (h, g @ u.data.T), (u, h.data.T @ g),
                (b, g.sum(axis=0) if g.ndim > 1 else g))
    return Tensor(out_data, parents=(x, w, h, u, b), backward=bwd)


def _sigmoid(x: Array) -> Array:
    # tanh form avoids overflow for large negative inputs
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)
    def bwd(g):
        return ((a, g * s * (1.0 - s)),)
    return Tensor(s, parents=(a,), backward=bwd)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    def bwd(g):
        return ((a, g * (1.0 - t * t)),)
    return Tensor(t, parents=(a,), backward=bwd)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    widths = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + widths)
    def bwd(g):
        pieces = []
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            pieces.append((t, g[tuple(idx)]))
        return pieces
    return Tensor(out_data, parents=tuple(tensors), backward=bwd)


def stack(tensors: list[Tensor], axis: int = 1) -> Tensor:
    out_data = np.stack([t.data for t in tensors], axis=axis)
    def bwd(g):
        slices = np.moveaxis(g, axis, 0)
        return [(t, slices[i]) for i, t in enumerate(tensors)]
    return Tensor(out_data, parents=tuple(tensors), backward=bwd)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    out_data = a.data.reshape(shape)
    def bwd(g):
        return ((a, g.reshape(a.data.shape)),)
    return Tensor(out_data, parents=(a,), backward=bwd)


def expand_mid(a: Tensor, length: int) -> Tensor:
    """Repeat a (B, D) tensor into (B, length, D)."""
    out_data = np.broadcast_to(a.data[:, None, :], (a.data.shape[0], length, a.data.shape[1]))
    def bwd(g):
        return ((a, g.sum(axis=1)),)
    return Tensor(out_data, parents=(a,), backward=bwd)


def take_rows(table: Tensor, ids: Array) -> Tensor:
    """Embedding lookup: rows of ``table`` selected by integer ids."""
    ids = np.asarray(ids, dtype=np.int64)
    out_data = table.data[ids]
    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return ((table, gt),)
    return Tensor(out_data, parents=(table,), backward=bwd)


def softmax_values(scores: Array, mask: Array | None = None) -> Array:
    """Plain-array masked softmax along the last axis.

    Max-subtracted for stability; masked positions get probability zero.
    Raises FullyMaskedError if any row has no unmasked position.
    """
    scores = _as_f64(scores)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != scores.shape:
            raise ShapeError(f"mask shape {mask.shape} != scores shape {scores.shape}")
        if not mask.any(axis=-1).all():
            raise FullyMaskedError("softmax over a fully masked row")
        shifted = np.where(mask, scores, -np.inf)
        m = shifted.max(axis=-1, keepdims=True)
        e = np.exp(shifted - m)
        e = np.where(mask, e, 0.0)
    else:
        m = scores.max(axis=-1, keepdims=True)
        e = np.exp(scores - m)
    return e / e.sum(axis=-1, keepdims=True)


def masked_softmax(scores: Tensor, mask: Array | None = None) -> Tensor:
    p = softmax_values(scores.data, mask)
    def bwd(g):
        dot = (g * p).sum(axis=-1, keepdims=True)
        return ((scores, p * (g - dot)),)
    return Tensor(p, parents=(scores,), backward=bwd)


def attention_mix(alpha: Tensor, states: Tensor) -> Tensor:
    """Weighted sum of per-position states: (B,l) x (B,l,D) -> (B,D)."""
    if alpha.data.shape != states.data.shape[:2]:
        raise ShapeError(f"attention_mix: {alpha.data.shape} vs {states.data.shape}")
    out_data = np.einsum("bl,bld->bd", alpha.data, states.data)
    def bwd(g):
        return ((alpha, np.einsum("bd,bld->bl", g, states.data)),
                (states, np.einsum("bl,bd->bld", alpha.data, g)))
    return Tensor(out_data, parents=(alpha, states), backward=bwd)


def gru_mix(z: Tensor, h_prev: Tensor, h_tilde: Tensor) -> Tensor:
    """(1 - z) * h_prev + z * h_tilde in a single node."""
    out_data = (1.0 - z.data) * h_prev.data + z.data * h_tilde.data
    def bwd(g):
        return ((z, g * (h_tilde.data - h_prev.data)),
                (h_prev, g * (1.0 - z.data)),
                (h_tilde, g * z.data))
    return Tensor(out_data, parents=(z, h_prev, h_tilde), backward=bwd)


def where_rows(keep: Array, a: Tensor, b: Tensor) -> Tensor:
    """Per-row select: keep[i] picks a[i], else b[i]. ``keep`` is constant."""
    k = np.asarray(keep, dtype=np.float64).reshape(-1, 1)
    out_data = k * a.data + (1.0 - k) * b.data
    def bwd(g):
        return ((a, g * k), (b, g * (1.0 - k)))
    return Tensor(out_data, parents=(a, b), backward=bwd)


def nll_loss(logits: Tensor, target_ids: Array, weights: Array | None = None) -> Tensor:
    """Summed negative log-likelihood of ``target_ids`` under softmax(logits).

    ``weights`` (per row, typically a 0/1 padding mask) scales each row's
    contribution. Returns a scalar tensor. The fused backward rule is the
    classic (softmax - onehot).
    """
    ids = np.asarray(target_ids, dtype=np.int64)
    x = logits.data
    m = x.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(x - m).sum(axis=-1, keepdims=True))
    logp = x - lse
    rows = np.arange(x.shape[0])
    per_row = -logp[rows, ids]
    w = np.ones_like(per_row) if weights is None else _as_f64(weights)
    out_data = np.array((per_row * w).sum())
    def bwd(g):
        p = np.exp(logp)
        p[rows, ids] -= 1.0
        return ((logits, p * (w * float(g))[:, None]),)
    return Tensor(out_data, parents=(logits,), backward=bwd)


def add_n(tensors: list[Tensor]) -> Tensor:
    """Sum a list of same-shape tensors in one node."""
    out_data = tensors[0].data.copy()
    for t in tensors[1:]:
        out_data += t.data
    def bwd(g):
        return [(t, g) for t in tensors]
    return Tensor(out_data, parents=tuple(tensors), backward=bwd)
