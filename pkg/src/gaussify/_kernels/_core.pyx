# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: beam-splitter transition bands, the full merge
contraction, and quadrature PDF evaluation.

The transition amplitudes for total photon number S are eigenvectors of
the symmetric tridiagonal operator with off-diagonal sqrt(j(S-j+1)) and
exact eigenvalues 2m - S.  Each eigenvector is generated by a two-sided
three-term recurrence (forward from j=0, backward from j=S, matched at
mid-grid), which is stable because the recursion always runs *into* the
classically allowed region.  Running values are rescaled whenever they
cross 1e250 so arbitrarily large subspaces stay inside double range.
"""

import numpy as np

from libc.math cimport exp, fabs, isfinite, sqrt

BACKEND = "compiled"

cdef double BIG = 1e250
cdef double INV_SQRT_SQRT_PI = 0.7511255444649425  # pi**-0.25


cdef void _eigvec(Py_ssize_t S, double lam, double* off, double* inv_off,
                  double* c, double* d, double* out) noexcept nogil:
    """Normalized eigenvector for eigenvalue lam, written to out[0..S]."""
    cdef Py_ssize_t j, k, jm, i
    cdef double a, scale, vmax, nrm
    if S == 0:
        out[0] = 1.0
        return
    jm = S // 2
    # forward sweep: c[0..jm+1]
    c[0] = 1.0
    c[1] = lam * inv_off[0]
    for j in range(1, jm + 1):
        c[j + 1] = (lam * c[j] - off[j - 1] * c[j - 1]) * inv_off[j]
        a = fabs(c[j + 1])
        if a > BIG:
            a = 1.0 / a
            for i in range(j + 2):
                c[i] *= a
    # backward sweep: d[jm..S]
    d[S] = 1.0
    d[S - 1] = lam * inv_off[S - 1]
    for j in range(S - 1, jm, -1):
        d[j - 1] = (lam * d[j] - off[j] * d[j + 1]) * inv_off[j - 1]
        a = fabs(d[j - 1])
        if a > BIG:
            a = 1.0 / a
            for i in range(j - 1, S + 1):
                d[i] *= a
    # match where the backward solution is larger (avoids nodes)
    k = jm
    if fabs(d[jm + 1]) > fabs(d[jm]):
        k = jm + 1
    if d[k] == 0.0:
        k = jm + 1 if k == jm else jm
    scale = c[k] / d[k]
    for i in range(k + 1):
        out[i] = c[i]
    for i in range(k + 1, S + 1):
        out[i] = d[i] * scale
        if not isfinite(out[i]):
            out[i] = 0.0
    # normalize in two passes to dodge overflow in the sum of squares
    vmax = 0.0
    for i in range(S + 1):
        a = fabs(out[i])
        if a > vmax:
            vmax = a
    vmax = 1.0 / vmax
    nrm = 0.0
    for i in range(S + 1):
        out[i] *= vmax
        nrm += out[i] * out[i]
    nrm = 1.0 / sqrt(nrm)
    for i in range(S + 1):
        out[i] *= nrm


cdef void _fill_off(Py_ssize_t S, double* off, double* inv_off) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(S):
        off[j] = sqrt((j + 1.0) * (S - j))
        inv_off[j] = 1.0 / off[j]


def bs_band(Py_ssize_t S, Py_ssize_t n_rows):
    """Rows j = S-r (r = 0..n_rows-1) of the transition block for subspace S."""
    cdef Py_ssize_t k = n_rows if n_rows <= S + 1 else S + 1
    out_arr = np.empty((k, S + 1))
    cdef double[:, ::1] out = out_arr
    work_arr = np.empty(4 * (S + 1))
    cdef double[::1] work = work_arr
    cdef double* off = &work[0]
    cdef double* inv_off = &work[S + 1]
    cdef double* c = &work[2 * (S + 1)]
    cdef double* d = &work[3 * (S + 1)]
    cdef Py_ssize_t r, m
    with nogil:
        if S > 0:
            _fill_off(S, off, inv_off)
        for r in range(k):
            _eigvec(S, S - 2.0 * r, off, inv_off, c, d, &out[r, 0])
            for m in range(S + 1):
                out[r, m] *= out[r, m]
    return out_arr


def bs_block(Py_ssize_t S):
    """Full transition-probability block B[j, m] for total photon number S."""
    band = bs_band(S, S + 1)
    return np.ascontiguousarray(band[::-1])


def merge_fock(const double[::1] p, const double[::1] povm, double band_tol=1e-22):
    """One beam-splitter merge of two copies of ``p`` with a diagonal POVM.

    Returns the unnormalized output distribution (length 2 n - 1) and the
    success probability.  See the fallback module for the contract.
    """
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t M = 2 * (n - 1)
    cdef Py_ssize_t npov = povm.shape[0]
    cdef Py_ssize_t keff = npov - 1
    cdef Py_ssize_t S, r, m, mlo, mhi, rows, j
    cdef double pi_max = 0.0, acc, psucc
    q_arr = np.zeros(M + 1)
    cdef double[::1] q = q_arr
    for m in range(npov):
        if povm[m] > pi_max:
            pi_max = povm[m]
    if pi_max == 0.0:
        return q_arr, 0.0
    if band_tol > 0.0:
        keff = -1
        for m in range(npov):
            if povm[m] > band_tol * pi_max:
                keff = m
    if keff < 0:
        return q_arr, 0.0
    work_arr = np.empty(6 * (M + 1) + 2)
    cdef double[::1] work = work_arr
    cdef double* off = &work[0]
    cdef double* inv_off = &work[M + 1]
    cdef double* c = &work[2 * (M + 1)]
    cdef double* d = &work[3 * (M + 1)]
    cdef double* vec = &work[4 * (M + 1)]
    cdef double* w = &work[5 * (M + 1)]
    with nogil:
        for S in range(M + 1):
            if S > 0:
                _fill_off(S, off, inv_off)
            mlo = S - n + 1
            if mlo < 0:
                mlo = 0
            mhi = S if S < n - 1 else n - 1
            for m in range(mlo, mhi + 1):
                w[m] = p[m] * p[S - m]
            rows = (keff if keff < S else S) + 1
            for r in range(rows):
                _eigvec(S, S - 2.0 * r, off, inv_off, c, d, vec)
                acc = 0.0
                for m in range(mlo, mhi + 1):
                    acc += vec[m] * vec[m] * w[m]
                q[S - r] += povm[r] * acc
        psucc = 0.0
        for j in range(M + 1):
            psucc += q[j]
    return q_arr, psucc


def pdf_values(const double[::1] probs, const double[::1] x):
    """Quadrature PDF sum_n p_n psi_n(x)^2 via the normalized recurrence."""
    cdef Py_ssize_t npts = x.shape[0]
    cdef Py_ssize_t nmax = probs.shape[0] - 1
    out_arr = np.empty(npts)
    cdef double[::1] out = out_arr
    coef_arr = np.empty(2 * max(nmax, 1))
    cdef double[::1] coef = coef_arr
    cdef Py_ssize_t i, k
    cdef double xi, psi_prev, psi, psi_next, acc
    with nogil:
        for k in range(1, nmax):
            coef[2 * k] = sqrt(2.0 / (k + 1))
            coef[2 * k + 1] = sqrt(k / (k + 1.0))
        for i in range(npts):
            xi = x[i]
            psi_prev = INV_SQRT_SQRT_PI * exp(-0.5 * xi * xi)
            acc = probs[0] * psi_prev * psi_prev
            if nmax >= 1:
                psi = sqrt(2.0) * xi * psi_prev
                acc += probs[1] * psi * psi
                for k in range(1, nmax):
                    psi_next = xi * coef[2 * k] * psi - coef[2 * k + 1] * psi_prev
                    psi_prev = psi
                    psi = psi_next
                    acc += probs[k + 1] * psi * psi
            out[i] = acc
    return out_arr
