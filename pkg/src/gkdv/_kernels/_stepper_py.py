"""Pure-numpy fallbacks for the fused ETDRK4 kernels."""

import numpy as np


def pow_int(arr, p):
    np.power(arr, p, out=arr)


def stage_ab(out, e2, u, q, nl):
    np.multiply(e2, u, out=out)
    out += q * nl


def stage_c(out, e2, a, q, nb, nu):
    np.multiply(e2, a, out=out)
    out += q * (2.0 * nb - nu)


def combine_final(out, e, u, f1, n0, f2, n1, n2, f3, n3):
    np.multiply(e, u, out=out)
    out += f1 * n0
    out += (2.0 * f2) * (n1 + n2)
    out += f3 * n3


def pad_spectrum(out, uh, scale):
    n = uh.shape[0]
    out[: n - 1] = uh[: n - 1]
    out[: n - 1] *= scale
    out[n - 1 :] = 0.0
