"""Hermite polynomials and harmonic-oscillator eigenfunctions.

Everything here uses the quadrature convention x = (a + a+)/sqrt(2), so
the vacuum wavefunction is pi**-1/4 exp(-x^2/2) with variance 1/2.  The
eigenfunctions are generated by the normalized three-term recurrence

    psi_{n+1} = x sqrt(2/(n+1)) psi_n - sqrt(n/(n+1)) psi_{n-1},

which stays bounded for any order, unlike the factorial-normalized
closed form that overflows near n ~ 150.
"""

import numpy as np


def psi_matrix(n_max, x):
    """Oscillator eigenfunctions psi_n(x) for n = 0..n_max.

    Returns an array of shape (n_max + 1, len(x)).
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty((n_max + 1, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = x * np.sqrt(2.0 / (n + 1)) * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def hermite_values(k, x, accumulate_long=False):
    """Physicists' Hermite polynomial H_k evaluated elementwise on x.

    Uses H_{k+1} = 2 x H_k - 2 k H_{k-1}.  With ``accumulate_long`` the
    recurrence runs in extended precision; pattern-function estimators
    use that for k >= 6, where the alternating growth of H_k against
    large sample values starts to eat double-precision headroom.
    """
    dtype = np.longdouble if accumulate_long else np.float64
    x = np.asarray(x, dtype=dtype)
    h_prev = np.ones_like(x)
    if k == 0:
        return h_prev
    h = 2.0 * x
    for n in range(1, k):
        h, h_prev = 2.0 * x * h - 2.0 * n * h_prev, h
    return h
