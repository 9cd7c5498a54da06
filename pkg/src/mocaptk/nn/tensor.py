"""Reverse-mode differentiation over dense float64 arrays.

Define-by-run: every operation records the tensors it consumed and a
closure mapping output gradients to input gradients.  ``backward`` walks
the recorded operations in reverse topological order and accumulates
gradients on the leaves.  The graph is rebuilt on every forward pass,
which keeps variable-length sequences painless.

The LSTM step is a single fused node (two forward matmuls plus the
elementwise gate block from :mod:`mocaptk.kernels`) so that unrolled
recurrences stay cheap to record and to replay.
"""
from __future__ import annotations

import numpy as np

from ..errors import NonScalarLoss, ShapeMismatch
from .. import kernels

_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; scalars are lifted to constant tensors
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division not supported; divide by a scalar")
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __getitem__(self, key):
        return getitem(self, key)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class _Record:
    __slots__ = ("inputs", "outputs", "bwd")

    def __init__(self, inputs, outputs, bwd):
        self.inputs = inputs
        self.outputs = outputs
        self.bwd = bwd


def _attach(inputs, outputs, bwd):
    if not _grad_enabled:
        return
    if not any(t.requires_grad for t in inputs):
        return
    rec = _Record(tuple(inputs), tuple(outputs), bwd)
    for out in outputs:
        out.requires_grad = True
        out.op = rec


def _toposort(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        rec, done = stack.pop()
        if done:
            order.append(rec)
            continue
        if id(rec) in seen:
            continue
        seen.add(id(rec))
        stack.append((rec, True))
        for t in rec.inputs:
            if t.op is not None and id(t.op) not in seen:
                stack.append((t.op, False))
    return order


def backward(loss: Tensor):
    """Populate ``grad`` on every requires_grad leaf reachable from *loss*.

    Repeated calls accumulate into existing gradients until they are
    zeroed.
    """
    if loss.data.size != 1:
        raise NonScalarLoss(f"loss has {loss.data.size} elements")
    seed = np.ones_like(loss.data)
    if loss.op is None:
        if loss.requires_grad:
            loss.grad = seed if loss.grad is None else loss.grad + seed
        return
    grads = {id(loss): seed}
    tensors = {id(loss): loss}
    for rec in reversed(_toposort(loss.op)):
        out_grads = []
        missing = True
        for out in rec.outputs:
            g = grads.get(id(out))
            if g is None:
                g = np.zeros_like(out.data)
            else:
                missing = False
            out_grads.append(g)
        if missing:
            continue
        in_grads = rec.bwd(*out_grads)
        for t, g in zip(rec.inputs, in_grads):
            if g is None or not t.requires_grad:
                continue
            if t.op is None:
                t.grad = g.copy() if t.grad is None else t.grad + g
            else:
                key = id(t)
                tensors[key] = t
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# --- elementwise / arithmetic ---

def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)
    _attach((a, b), (out,), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)
    _attach((a, b), (out,), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)

    def bwd(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    _attach((a, b), (out,), bwd)
    return out


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = Tensor(a.data * s)
    _attach((a,), (out,), lambda g: (g * s,))
    return out


def square(a: Tensor) -> Tensor:
    out = Tensor(a.data * a.data)
    _attach((a,), (out,), lambda g: (2.0 * a.data * g,))
    return out


def sqrt(a: Tensor) -> Tensor:
    root = np.sqrt(a.data)
    out = Tensor(root)
    _attach((a,), (out,), lambda g: (g / (2.0 * root),))
    return out


def exp(a: Tensor) -> Tensor:
    val = np.exp(a.data)
    out = Tensor(val)
    _attach((a,), (out,), lambda g: (g * val,))
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data))
    _attach((a,), (out,), lambda g: (g / a.data,))
    return out


def tanh(a: Tensor) -> Tensor:
    val = np.tanh(a.data)
    out = Tensor(val)
    _attach((a,), (out,), lambda g: (g * (1.0 - val * val),))
    return out


def sigmoid(a: Tensor) -> Tensor:
    val = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(val)
    _attach((a,), (out,), lambda g: (g * val * (1.0 - val),))
    return out


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise minimum; ties route the gradient to the first operand."""
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"minimum: {a.data.shape} vs {b.data.shape}")
    take_a = a.data <= b.data
    out = Tensor(np.where(take_a, a.data, b.data))
    _attach((a, b), (out,), lambda g: (g * take_a, g * ~take_a))
    return out


# --- reductions ---

def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    _attach((a,), (out,), bwd)
    return out


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# --- shape manipulation ---

def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    _attach((a,), (out,), lambda g: (g.reshape(a.data.shape),))
    return out


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeMismatch("transpose expects a matrix")
    out = Tensor(a.data.T)
    _attach((a,), (out,), lambda g: (g.T,))
    return out


def concat(tensors, axis=0) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    _attach(tuple(tensors), (out,), bwd)
    return out


def getitem(a: Tensor, key) -> Tensor:
    out = Tensor(a.data[key])

    def bwd(g):
        full = np.zeros_like(a.data)
        full[key] += g
        return (full,)

    _attach((a,), (out,), bwd)
    return out


def select_rows(a: Tensor, indices) -> Tensor:
    """Pick a[i, indices[i]] for every row i (class-likelihood lookup)."""
    indices = np.asarray(indices, dtype=np.intp)
    rows = np.arange(a.data.shape[0])
    out = Tensor(a.data[rows, indices])

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (rows, indices), g)
        return (full,)

    _attach((a,), (out,), bwd)
    return out


# --- linear algebra ---

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data)
    _attach((a, b), (out,), lambda g: (g @ b.data.T, a.data.T @ g))
    return out


def affine(x: Tensor, w: Tensor, bias: Tensor | None = None, tied: bool = False) -> Tensor:
    """x @ w.T + bias as one graph node (w stored (out, in)).

    With ``tied=True`` the same weight matrix is used transposed
    (x @ w + bias), which is how tied-weight decoders reuse encoder
    matrices without copying.
    """
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise ShapeMismatch("affine expects matrices")
    wd = w.data if tied else w.data.T
    if x.data.shape[1] != wd.shape[0]:
        raise ShapeMismatch(f"affine: {x.data.shape} @ {wd.shape}")
    val = x.data @ wd
    if bias is not None:
        val = val + bias.data
    out = Tensor(val)

    if bias is None:
        def bwd(g):
            if tied:
                return g @ w.data.T, x.data.T @ g
            return g @ w.data, g.T @ x.data

        _attach((x, w), (out,), bwd)
    else:
        def bwd(g):
            if tied:
                return g @ w.data.T, x.data.T @ g, g.sum(axis=0)
            return g @ w.data, g.T @ x.data, g.sum(axis=0)

        _attach((x, w, bias), (out,), bwd)
    return out


# --- probability ---

def softmax(a: Tensor, axis=-1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    val = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(val)

    def bwd(g):
        dot = (g * val).sum(axis=axis, keepdims=True)
        return (val * (g - dot),)

    _attach((a,), (out,), bwd)
    return out


def log_softmax(a: Tensor, axis=-1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    val = shifted - lse
    out = Tensor(val)

    def bwd(g):
        return (g - np.exp(val) * g.sum(axis=axis, keepdims=True),)

    _attach((a,), (out,), bwd)
    return out


def nll_loss(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of the true classes, from raw logits."""
    return scale(tmean(select_rows(log_softmax(logits), labels)), -1.0)


# --- fused recurrent step ---

def lstm_step(x: Tensor, h_prev: Tensor, c_prev: Tensor,
              w_input: Tensor, w_hidden: Tensor, bias: Tensor,
              pre_extra: Tensor | None = None):
    """One LSTM step as a single fused graph node.

    Shapes: x (B, I); h_prev, c_prev (B, H); w_input (4H, I);
    w_hidden (4H, H); bias (4H,).  ``pre_extra`` (B, 4H), when given, is
    added to the gate preactivations (conditioning connections).
    Gate packing is (input, forget, candidate, output); no peephole
    terms.  Returns (h, c).
    """
    hid = h_prev.data.shape[1]
    if (w_input.data.shape != (4 * hid, x.data.shape[1])
            or w_hidden.data.shape != (4 * hid, hid)
            or bias.data.shape != (4 * hid,)
            or c_prev.data.shape != h_prev.data.shape):
        raise ShapeMismatch("lstm_step: inconsistent parameter shapes")
    pre = x.data @ w_input.data.T + h_prev.data @ w_hidden.data.T + bias.data
    if pre_extra is not None:
        if pre_extra.data.shape != pre.shape:
            raise ShapeMismatch("lstm_step: pre_extra shape mismatch")
        pre = pre + pre_extra.data
    h_val, c_val, gates, tanh_c = kernels.lstm_gates_forward(
        np.ascontiguousarray(pre), np.ascontiguousarray(c_prev.data))
    h = Tensor(h_val)
    c = Tensor(c_val)

    def bwd(gh, gc):
        dpre, dc_prev = kernels.lstm_gates_backward(
            np.ascontiguousarray(gh), np.ascontiguousarray(gc),
            gates, tanh_c, np.ascontiguousarray(c_prev.data))
        dx = dpre @ w_input.data
        dh_prev = dpre @ w_hidden.data
        dw_in = dpre.T @ x.data
        dw_hid = dpre.T @ h_prev.data
        db = dpre.sum(axis=0)
        if pre_extra is None:
            return dx, dh_prev, dc_prev, dw_in, dw_hid, db
        return dx, dh_prev, dc_prev, dw_in, dw_hid, db, dpre

    inputs = (x, h_prev, c_prev, w_input, w_hidden, bias)
    if pre_extra is not None:
        inputs = inputs + (pre_extra,)
    _attach(inputs, (h, c), bwd)
    return h, c
