# cython: language_level=3
"""Compiled hot kernels. Same contracts as pykernels, loop-based."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

ZERO_NORM_EPS = 1e-12

cdef double _EPS = 1e-12


cdef void _prototype_norms(const double[:, ::1] weights, double[::1] wnorm) noexcept nogil:
    cdef Py_ssize_t c, j
    cdef double acc
    for c in range(weights.shape[0]):
        acc = 0.0
        for j in range(weights.shape[1]):
            acc += weights[c, j] * weights[c, j]
        wnorm[c] = sqrt(acc)


def cosine_scores(const double[:, ::1] feats, const double[:, ::1] weights):
    cdef Py_ssize_t n = feats.shape[0]
    cdef Py_ssize_t d = feats.shape[1]
    cdef Py_ssize_t nc = weights.shape[0]
    out_arr = np.empty((n, nc), dtype=np.float64)
    wn_arr = np.empty(nc, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] wnorm = wn_arr
    cdef Py_ssize_t i, c, j
    cdef double acc, fnorm, v
    _prototype_norms(weights, wnorm)
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += feats[i, j] * feats[i, j]
            fnorm = sqrt(acc)
            if fnorm < _EPS:
                for c in range(nc):
                    out[i, c] = 0.0
                continue
            for c in range(nc):
                acc = 0.0
                for j in range(d):
                    acc += feats[i, j] * weights[c, j]
                v = acc / (fnorm * wnorm[c])
                if v > 1.0:
                    v = 1.0
                elif v < -1.0:
                    v = -1.0
                out[i, c] = v
    return out_arr


def linear_scores(const double[:, ::1] feats, const double[:, ::1] weights, const double[::1] bias):
    cdef Py_ssize_t n = feats.shape[0]
    cdef Py_ssize_t d = feats.shape[1]
    cdef Py_ssize_t nc = weights.shape[0]
    out_arr = np.empty((n, nc), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, c, j
    cdef double acc
    with nogil:
        for i in range(n):
            for c in range(nc):
                acc = bias[c]
                for j in range(d):
                    acc += feats[i, j] * weights[c, j]
                out[i, c] = acc
    return out_arr


def ce_loss_grad_cosine(const double[:, ::1] feats, const double[:, ::1] weights,
                        const cnp.int64_t[::1] labels, double tau):
    cdef Py_ssize_t n = feats.shape[0]
    cdef Py_ssize_t d = feats.shape[1]
    cdef Py_ssize_t nc = weights.shape[0]
    grad_arr = np.zeros((nc, d), dtype=np.float64)
    wn_arr = np.empty(nc, dtype=np.float64)
    what_arr = np.empty((nc, d), dtype=np.float64)
    s_arr = np.empty(nc, dtype=np.float64)
    u_arr = np.empty(d, dtype=np.float64)
    cdef double[:, ::1] grad = grad_arr
    cdef double[::1] wnorm = wn_arr
    cdef double[:, ::1] what = what_arr
    cdef double[::1] s = s_arr
    cdef double[::1] u = u_arr
    cdef Py_ssize_t i, c, j, y, pred
    cdef double acc, fnorm, v, zmax, zsum, p, g, loss
    cdef cnp.int64_t correct = 0
    loss = 0.0
    _prototype_norms(weights, wnorm)
    for c in range(nc):
        for j in range(d):
            what_arr[c, j] = weights[c, j] / wn_arr[c]
    with nogil:
        for i in range(n):
            y = <Py_ssize_t> labels[i]
            acc = 0.0
            for j in range(d):
                acc += feats[i, j] * feats[i, j]
            fnorm = sqrt(acc)
            if fnorm < _EPS:
                for j in range(d):
                    u[j] = 0.0
            else:
                for j in range(d):
                    u[j] = feats[i, j] / fnorm
            pred = 0
            for c in range(nc):
                acc = 0.0
                for j in range(d):
                    acc += u[j] * what[c, j]
                if acc > 1.0:
                    acc = 1.0
                elif acc < -1.0:
                    acc = -1.0
                s[c] = acc
                if s[c] > s[pred]:
                    pred = c
            if pred == y:
                correct += 1
            zmax = tau * s[pred]  # max over c of tau*s, tau > 0
            zsum = 0.0
            for c in range(nc):
                zsum += exp(tau * s[c] - zmax)
            loss -= tau * s[y] - zmax - log(zsum)
            for c in range(nc):
                p = exp(tau * s[c] - zmax) / zsum
                g = tau * p
                if c == y:
                    g -= tau
                g /= wnorm[c]
                for j in range(d):
                    grad[c, j] += g * (u[j] - s[c] * what[c, j])
    grad_arr /= n
    return loss / n, grad_arr, int(correct)


def ce_loss_grad_linear(const double[:, ::1] feats, const double[:, ::1] weights, const double[::1] bias,
                        const cnp.int64_t[::1] labels, double tau):
    cdef Py_ssize_t n = feats.shape[0]
    cdef Py_ssize_t d = feats.shape[1]
    cdef Py_ssize_t nc = weights.shape[0]
    grad_w_arr = np.zeros((nc, d), dtype=np.float64)
    grad_b_arr = np.zeros(nc, dtype=np.float64)
    s_arr = np.empty(nc, dtype=np.float64)
    cdef double[:, ::1] grad_w = grad_w_arr
    cdef double[::1] grad_b = grad_b_arr
    cdef double[::1] s = s_arr
    cdef Py_ssize_t i, c, j, y, pred
    cdef double acc, zmax, zsum, p, g, loss
    cdef cnp.int64_t correct = 0
    loss = 0.0
    with nogil:
        for i in range(n):
            y = <Py_ssize_t> labels[i]
            pred = 0
            for c in range(nc):
                acc = bias[c]
                for j in range(d):
                    acc += feats[i, j] * weights[c, j]
                s[c] = acc
                if s[c] > s[pred]:
                    pred = c
            if pred == y:
                correct += 1
            zmax = tau * s[pred]
            zsum = 0.0
            for c in range(nc):
                zsum += exp(tau * s[c] - zmax)
            loss -= tau * s[y] - zmax - log(zsum)
            for c in range(nc):
                p = exp(tau * s[c] - zmax) / zsum
                g = tau * p
                if c == y:
                    g -= tau
                grad_b[c] += g
                for j in range(d):
                    grad_w[c, j] += g * feats[i, j]
    grad_w_arr /= n
    grad_b_arr /= n
    return loss / n, grad_w_arr, grad_b_arr, int(correct)
