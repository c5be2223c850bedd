# cython: boundscheck=False, wraparound=False, cdivision=True
"""Fused elementwise kernels for the ETDRK4 stepping loop.

These fuse the stage-combination arithmetic and the real-space integer power
so each pass touches memory once; the FFTs stay in scipy.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex dcomplex


def pow_int(double[::1] arr, int p):
    """In-place integer power arr **= p via a multiply chain."""
    cdef Py_ssize_t i, n = arr.shape[0]
    cdef int j
    cdef double v, acc
    for i in range(n):
        v = arr[i]
        acc = v
        for j in range(p - 1):
            acc *= v
        arr[i] = acc


def stage_ab(dcomplex[::1] out, dcomplex[::1] e2, dcomplex[::1] u,
             dcomplex[::1] q, dcomplex[::1] nl):
    """out = e2*u + q*nl"""
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(n):
        out[i] = e2[i] * u[i] + q[i] * nl[i]


def stage_c(dcomplex[::1] out, dcomplex[::1] e2, dcomplex[::1] a,
            dcomplex[::1] q, dcomplex[::1] nb, dcomplex[::1] nu):
    """out = e2*a + q*(2*nb - nu)"""
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(n):
        out[i] = e2[i] * a[i] + q[i] * (2.0 * nb[i] - nu[i])


def combine_final(dcomplex[::1] out, dcomplex[::1] e, dcomplex[::1] u,
                  dcomplex[::1] f1, dcomplex[::1] n0, dcomplex[::1] f2,
                  dcomplex[::1] n1, dcomplex[::1] n2, dcomplex[::1] f3,
                  dcomplex[::1] n3):
    """out = e*u + f1*n0 + 2*f2*(n1+n2) + f3*n3"""
    cdef Py_ssize_t i, n = out.shape[0]
    for i in range(n):
        out[i] = (e[i] * u[i] + f1[i] * n0[i]
                  + 2.0 * f2[i] * (n1[i] + n2[i]) + f3[i] * n3[i])


def pad_spectrum(dcomplex[::1] out, dcomplex[::1] uh, double scale):
    """out[:len(uh)] = scale*uh (Nyquist bin dropped), out[len(uh):] = 0."""
    cdef Py_ssize_t i, n = uh.shape[0], m = out.shape[0]
    for i in range(n - 1):
        out[i] = scale * uh[i]
    for i in range(n - 1, m):
        out[i] = 0.0
