"""Numpy implementation of the fused LSTM cell kernels.

This is the fallback backend used when the compiled extension is not
available (or is disabled via MOCAPTK_PURE_PYTHON=1).  Both backends
must stay bit-for-bit interchangeable; tests/test_kernels.py compares
them whenever the extension is importable.

Gate layout in the packed 4H dimension is (input, forget, candidate,
output) — an interop contract for serialized checkpoints.
"""
import numpy as np

BACKEND = "numpy"


def lstm_gates_forward(pre, c_prev):
    """Elementwise half of one LSTM step.

    pre     (B, 4H) gate preactivations, packed (i, f, g, o)
    c_prev  (B, H)  previous cell state

    Returns (h, c, gates, tanh_c) where gates holds the activated
    i, f, g, o values (cached for the backward pass).
    """
    h4 = pre.shape[1]
    hid = h4 // 4
    gates = np.empty_like(pre)
    gates[:, :hid] = 1.0 / (1.0 + np.exp(-pre[:, :hid]))
    gates[:, hid:2 * hid] = 1.0 / (1.0 + np.exp(-pre[:, hid:2 * hid]))
    gates[:, 2 * hid:3 * hid] = np.tanh(pre[:, 2 * hid:3 * hid])
    gates[:, 3 * hid:] = 1.0 / (1.0 + np.exp(-pre[:, 3 * hid:]))

    i = gates[:, :hid]
    f = gates[:, hid:2 * hid]
    g = gates[:, 2 * hid:3 * hid]
    o = gates[:, 3 * hid:]
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, gates, tanh_c


def lstm_gates_backward(dh, dc, gates, tanh_c, c_prev):
    """Backward of lstm_gates_forward.

    dh, dc  (B, H) incoming gradients for h and c
    Returns (dpre, dc_prev).
    """
    hid = dh.shape[1]
    i = gates[:, :hid]
    f = gates[:, hid:2 * hid]
    g = gates[:, 2 * hid:3 * hid]
    o = gates[:, 3 * hid:]

    dc_total = dc + dh * o * (1.0 - tanh_c * tanh_c)
    dpre = np.empty_like(gates)
    dpre[:, :hid] = dc_total * g * i * (1.0 - i)
    dpre[:, hid:2 * hid] = dc_total * c_prev * f * (1.0 - f)
    dpre[:, 2 * hid:3 * hid] = dc_total * i * (1.0 - g * g)
    dpre[:, 3 * hid:] = dh * tanh_c * o * (1.0 - o)
    dc_prev = dc_total * f
    return dpre, dc_prev
