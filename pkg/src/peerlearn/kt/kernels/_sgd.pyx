# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled SGD kernel; arithmetic mirrors sgd_py.py exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def run_epoch(cnp.int64_t[::1] user_idx, cnp.int64_t[::1] item_idx,
              double[::1] values, cnp.int64_t[::1] order, double mu,
              double[::1] bu, double[::1] bq,
              double[:, ::1] uf, double[:, ::1] vf,
              double lr, double reg):
    cdef Py_ssize_t n_obs = order.shape[0]
    cdef Py_ssize_t n_factors = uf.shape[1]
    cdef Py_ssize_t idx, i, n, m, f
    cdef double dot, z, p, gate, eg, u_old, v_old
    cdef double step = 2.0 * lr
    for idx in range(n_obs):
        i = order[idx]
        n = user_idx[i]
        m = item_idx[i]
        dot = 0.0
        for f in range(n_factors):
            dot += uf[n, f] * vf[m, f]
        z = mu + bu[n] + bq[m] + dot
        p = 0.0 if z < 0.0 else (1.0 if z > 1.0 else z)
        gate = 1.0 if (z > 0.0 and z < 1.0) else 0.0
        eg = (values[i] - p) * gate
        bu[n] += step * (eg - reg * bu[n])
        bq[m] += step * (eg - reg * bq[m])
        for f in range(n_factors):
            u_old = uf[n, f]
            v_old = vf[m, f]
            uf[n, f] = u_old + step * (eg * v_old - reg * u_old)
            vf[m, f] = v_old + step * (eg * u_old - reg * v_old)


def batch_loss(cnp.int64_t[::1] user_idx, cnp.int64_t[::1] item_idx,
               double[::1] values, double mu,
               double[::1] bu, double[::1] bq,
               double[:, ::1] uf, double[:, ::1] vf, double reg):
    cdef Py_ssize_t n_obs = values.shape[0]
    cdef Py_ssize_t n_factors = uf.shape[1]
    cdef Py_ssize_t i, n, m, f
    cdef double dot, z, p, e
    cdef double sse = 0.0
    cdef double pen = 0.0
    for i in range(n_obs):
        n = user_idx[i]
        m = item_idx[i]
        dot = 0.0
        for f in range(n_factors):
            dot += uf[n, f] * vf[m, f]
        z = mu + bu[n] + bq[m] + dot
        p = 0.0 if z < 0.0 else (1.0 if z > 1.0 else z)
        e = values[i] - p
        sse += e * e
    for n in range(bu.shape[0]):
        pen += bu[n] * bu[n]
    for m in range(bq.shape[0]):
        pen += bq[m] * bq[m]
    for n in range(uf.shape[0]):
        for f in range(n_factors):
            pen += uf[n, f] * uf[n, f]
    for m in range(vf.shape[0]):
        for f in range(n_factors):
            pen += vf[m, f] * vf[m, f]
    return sse + reg * pen
