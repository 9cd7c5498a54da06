"""Dense and recurrent building blocks plus their initialization rules.

Initialization contract: feedforward weights uniform on
[-sqrt(1/fanin), +sqrt(1/fanin)]; recurrent matrices orthonormal (per
gate block for LSTMs); biases zero except the forget gate, which starts
at 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptySequence
from . import tensor as T
from .tensor import Tensor


def uniform_fanin(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    bound = np.sqrt(1.0 / in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


def orthonormal(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    # fix the sign convention so the distribution is uniform over O(n)
    return q * np.sign(np.diag(r))


@dataclass
class LstmCellParams:
    w_input: Tensor   # (4H, I), gate packing (i, f, g, o)
    w_hidden: Tensor  # (4H, H)
    bias: Tensor      # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.w_hidden.data.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_input.data.shape[1]


def init_lstm(rng: np.random.Generator, input_dim: int, hidden: int) -> LstmCellParams:
    w_in = np.concatenate([uniform_fanin(rng, hidden, input_dim) for _ in range(4)], axis=0)
    w_hid = np.concatenate([orthonormal(rng, hidden) for _ in range(4)], axis=0)
    bias = np.zeros(4 * hidden)
    bias[hidden:2 * hidden] = 1.0  # forget gate
    return LstmCellParams(Tensor(w_in, requires_grad=True),
                          Tensor(w_hid, requires_grad=True),
                          Tensor(bias, requires_grad=True))


@dataclass
class Dense:
    w: Tensor  # (out, in)
    b: Tensor  # (out,)

    def __call__(self, x: Tensor) -> Tensor:
        return T.affine(x, self.w, self.b)


def init_dense(rng: np.random.Generator, out_dim: int, in_dim: int) -> Dense:
    return Dense(Tensor(uniform_fanin(rng, out_dim, in_dim), requires_grad=True),
                 Tensor(np.zeros(out_dim), requires_grad=True))


def lstm_step(params: LstmCellParams, x: Tensor, h_prev: Tensor, c_prev: Tensor,
              pre_extra: Tensor | None = None):
    return T.lstm_step(x, h_prev, c_prev, params.w_input, params.w_hidden,
                       params.bias, pre_extra=pre_extra)


def zero_state(params: LstmCellParams, batch: int):
    hid = params.hidden_size
    return Tensor(np.zeros((batch, hid))), Tensor(np.zeros((batch, hid)))


def run_lstm(params: LstmCellParams, steps, reverse: bool = False,
             pre_extra: Tensor | None = None,
             init_state=None):
    """Unroll one LSTM layer over a list of (B, I) tensors.

    Returns the per-step hidden states in the original time order.
    ``pre_extra`` is a per-sequence conditioning term added to the gate
    preactivations at every step.
    """
    if not steps:
        raise EmptySequence("run_lstm over empty sequence")
    batch = steps[0].data.shape[0]
    if init_state is None:
        h, c = zero_state(params, batch)
    else:
        h, c = init_state
    ordered = reversed(steps) if reverse else steps
    outputs = []
    for x in ordered:
        h, c = lstm_step(params, x, h, c, pre_extra=pre_extra)
        outputs.append(h)
    if reverse:
        outputs.reverse()
    return outputs


def bdlstm_layer(params_fwd: LstmCellParams, params_bwd: LstmCellParams, steps):
    """Bidirectional layer: output at t is concat(h_fwd_t, h_bwd_t), width 2H."""
    if not steps:
        raise EmptySequence("bdlstm_layer over empty sequence")
    fwd = run_lstm(params_fwd, steps)
    bwd = run_lstm(params_bwd, steps, reverse=True)
    return [T.concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
