# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM cell kernels (single pass over the gate block).

Must stay numerically identical to kernels/_ref.py; the gate layout in
the packed 4H dimension is (input, forget, candidate, output).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()

BACKEND = "cython"


def lstm_gates_forward(double[:, ::1] pre, double[:, ::1] c_prev):
    cdef Py_ssize_t rows = pre.shape[0]
    cdef Py_ssize_t h4 = pre.shape[1]
    cdef Py_ssize_t hid = h4 // 4
    cdef cnp.ndarray[double, ndim=2] h_arr = np.empty((rows, hid))
    cdef cnp.ndarray[double, ndim=2] c_arr = np.empty((rows, hid))
    cdef cnp.ndarray[double, ndim=2] gates_arr = np.empty((rows, h4))
    cdef cnp.ndarray[double, ndim=2] tanh_c_arr = np.empty((rows, hid))
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] tanh_c = tanh_c_arr
    cdef Py_ssize_t b, j
    cdef double i, f, g, o, cv, tc

    with nogil:
        for b in range(rows):
            for j in range(hid):
                i = 1.0 / (1.0 + exp(-pre[b, j]))
                f = 1.0 / (1.0 + exp(-pre[b, hid + j]))
                g = tanh(pre[b, 2 * hid + j])
                o = 1.0 / (1.0 + exp(-pre[b, 3 * hid + j]))
                cv = f * c_prev[b, j] + i * g
                tc = tanh(cv)
                gates[b, j] = i
                gates[b, hid + j] = f
                gates[b, 2 * hid + j] = g
                gates[b, 3 * hid + j] = o
                c[b, j] = cv
                tanh_c[b, j] = tc
                h[b, j] = o * tc
    return h_arr, c_arr, gates_arr, tanh_c_arr


def lstm_gates_backward(double[:, ::1] dh, double[:, ::1] dc,
                        double[:, ::1] gates, double[:, ::1] tanh_c,
                        double[:, ::1] c_prev):
    cdef Py_ssize_t rows = dh.shape[0]
    cdef Py_ssize_t hid = dh.shape[1]
    cdef cnp.ndarray[double, ndim=2] dpre_arr = np.empty((rows, 4 * hid))
    cdef cnp.ndarray[double, ndim=2] dc_prev_arr = np.empty((rows, hid))
    cdef double[:, ::1] dpre = dpre_arr
    cdef double[:, ::1] dc_prev = dc_prev_arr
    cdef Py_ssize_t b, j
    cdef double i, f, g, o, tc, dct

    with nogil:
        for b in range(rows):
            for j in range(hid):
                i = gates[b, j]
                f = gates[b, hid + j]
                g = gates[b, 2 * hid + j]
                o = gates[b, 3 * hid + j]
                tc = tanh_c[b, j]
                dct = dc[b, j] + dh[b, j] * o * (1.0 - tc * tc)
                dpre[b, j] = dct * g * i * (1.0 - i)
                dpre[b, hid + j] = dct * c_prev[b, j] * f * (1.0 - f)
                dpre[b, 2 * hid + j] = dct * i * (1.0 - g * g)
                dpre[b, 3 * hid + j] = dh[b, j] * tc * o * (1.0 - o)
                dc_prev[b, j] = dct * f
    return dpre_arr, dc_prev_arr
