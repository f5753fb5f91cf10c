"""NumPy/LAPACK implementations of the hot kernels.

Used when the compiled extension is unavailable or explicitly disabled.
Semantics are identical to ``gaussify._kernels._core``; the compiled
module is just faster on large truncation dimensions.

The balanced-beam-splitter transition probabilities for total photon
number S are the squared entries of the eigenvector matrix of the
symmetric tridiagonal operator

    T |j> = sqrt((j+1)(S-j)) |j+1> + sqrt(j(S-j+1)) |j-1>,

whose spectrum is exactly {2m - S : m = 0..S}.  LAPACK's tridiagonal
eigensolver is numerically bulletproof here, which makes this module a
convenient cross-check for the recurrence used by the compiled kernel.
"""

import numpy as np
from scipy.linalg import eigh_tridiagonal

BACKEND = "numpy"

_SQRT_PI = np.sqrt(np.pi)

# Above this subspace size, computing only the measurement-relevant rows
# (LAPACK subset eigenvectors) beats the full decomposition.
_SUBSET_CROSSOVER = 700


def _offdiag(S):
    j = np.arange(1.0, S + 1.0)
    return np.sqrt(j * (S + 1.0 - j))


def bs_block(S):
    """Full transition-probability block for total photon number S.

    Returns B of shape (S+1, S+1) with B[j, m] the probability that with
    m photons in port one and S - m in port two, j photons leave through
    output one of a 50:50 beam splitter.
    """
    if S == 0:
        return np.ones((1, 1))
    w, v = eigh_tridiagonal(np.zeros(S + 1), _offdiag(S))
    v = v[:, np.argsort(w)]
    # eigenvalue 2j - S  <->  output row j; B[j, m] = v[m, j]^2 (blocks
    # are symmetric, so rows and columns are interchangeable)
    return (v * v).T


def bs_band(S, n_rows):
    """Rows j = S, S-1, ..., S-n_rows+1 of the block for subspace S.

    Returns an array of shape (min(n_rows, S+1), S+1) whose row r is
    B_S[S-r, :].  These are the only rows a merge against a rapidly
    decaying measurement needs.
    """
    k = min(n_rows, S + 1)
    if S == 0:
        return np.ones((1, 1))
    if S < _SUBSET_CROSSOVER or k > S // 2:
        return bs_block(S)[S::-1][:k]
    w, v = eigh_tridiagonal(
        np.zeros(S + 1), _offdiag(S), select="i", select_range=(S + 1 - k, S)
    )
    order = np.argsort(w)[::-1]  # row r=0 <-> largest eigenvalue, j = S
    v = v[:, order]
    return (v * v).T


def merge_fock(p, povm, band_tol=1e-22):
    """One beam-splitter merge of two copies of ``p`` with a diagonal POVM.

    Parameters
    ----------
    p:
        Photon-number probabilities of the input state, length n.
    povm:
        Diagonal POVM weights pi_k for the conditioning measurement on
        output two.  Entries beyond its length count as zero.
    band_tol:
        Trailing POVM weights below ``band_tol * max(povm)`` are dropped,
        which truncates each subspace block to the rows that can
        contribute.  Pass 0.0 to disable.

    Returns
    -------
    q, p_succ:
        Unnormalized output distribution of length 2n - 1 and the success
        probability sum(q).
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    povm = np.ascontiguousarray(povm, dtype=np.float64)
    n = p.size
    M = 2 * (n - 1)
    pi_max = povm.max(initial=0.0)
    keff = povm.size - 1
    if band_tol > 0.0 and pi_max > 0.0:
        significant = np.nonzero(povm > band_tol * pi_max)[0]
        keff = int(significant[-1]) if significant.size else -1
    q = np.zeros(M + 1)
    if keff < 0:
        return q, 0.0
    for S in range(M + 1):
        mlo, mhi = max(0, S - n + 1), min(S, n - 1)
        w = np.zeros(S + 1)
        w[mlo:mhi + 1] = p[mlo:mhi + 1] * p[S - mhi:S - mlo + 1][::-1]
        rows = min(keff, S) + 1
        band = bs_band(S, rows)
        contrib = band @ w
        q[S - rows + 1:S + 1] += (povm[:rows] * contrib)[::-1]
    return q, float(q.sum())


def pdf_values(probs, x):
    """Quadrature probability density sum_n p_n psi_n(x)^2.

    psi_n are the harmonic-oscillator eigenfunctions in the convention
    where the vacuum quadrature variance is 1/2, evaluated through the
    normalized three-term recurrence.
    """
    probs = np.asarray(probs, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    psi_prev = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    out = probs[0] * psi_prev * psi_prev
    if probs.size == 1:
        return out
    psi = np.sqrt(2.0) * x * psi_prev
    out = out + probs[1] * psi * psi
    for n in range(1, probs.size - 1):
        psi_next = x * np.sqrt(2.0 / (n + 1)) * psi - np.sqrt(n / (n + 1.0)) * psi_prev
        psi_prev, psi = psi, psi_next
        out = out + probs[n + 1] * psi * psi
    return out
