"""One elementary merge step: 50:50 beam-splitter interference of two
copies of a state followed by a diagonal conditioning measurement on one
output port.

The transition probabilities B(j, k | m, n) = |<j, k| U |m, n>|^2 of the
balanced beam splitter are organized by total photon number S = m + n
(the interaction conserves it), one (S+1) x (S+1) block per subspace.
Blocks are bisymmetric; row sums are 1 by unitarity; B(1, 1 | 1, 1) = 0
is the Hong-Ou-Mandel suppression.

Beam-splitter phase convention: a+ -> (a+ + b+)/sqrt(2),
b+ -> (a+ - b+)/sqrt(2).  For Fock-diagonal inputs every phase
convention produces identical probabilities, so the choice cannot be
observed through this module's outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import VanishingSuccessError
from .states import PhotonDistribution, validate_efficiency

#: Success probabilities below this default floor raise VanishingSuccessError.
DEFAULT_SUCCESS_FLOOR = 1e-30

#: Trailing POVM weights below this fraction of the peak weight cannot
#: move any reported quantity at the package's 1e-12 tolerances and are
#: skipped by the merge contraction.
DEFAULT_BAND_TOL = 1e-22


@dataclass(frozen=True)
class DiagonalPovm:
    """Diagonal POVM element with eigenvalues pi_n in [0, 1]."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True, order="C")
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d vector")
        if np.any(w < 0.0) or np.any(w > 1.0) or not np.all(np.isfinite(w)):
            raise ValueError("POVM weights must lie in [0, 1]")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class BsTransitionTable:
    """Cached transition-probability blocks up to a maximum total photon number.

    ``blocks[S][j, m]`` is B(j, S-j | m, S-m).  The table is immutable
    and can be shared by any number of concurrent merges.
    """

    blocks: tuple

    @property
    def max_total_photons(self) -> int:
        return len(self.blocks) - 1

    def prob(self, j, k, m, n) -> float:
        """B(j, k | m, n); zero unless photon number is conserved."""
        if min(j, k, m, n) < 0:
            return 0.0
        if j + k != m + n:
            return 0.0
        if m + n > self.max_total_photons:
            raise ValueError("table only covers total photon number <= %d"
                             % self.max_total_photons)
        return float(self.blocks[m + n][j, m])


def build_bs_table(max_total_photons: int) -> BsTransitionTable:
    """Precompute transition blocks for all subspaces S <= max_total_photons."""
    if max_total_photons < 0:
        raise ValueError("max_total_photons must be >= 0")
    blocks = []
    for S in range(max_total_photons + 1):
        block = _kernels.bs_block(S)
        block.flags.writeable = False
        blocks.append(block)
    return BsTransitionTable(tuple(blocks))


def make_nonclick_povm(eta, n_max: int) -> DiagonalPovm:
    """Non-click element of a photon detector with efficiency eta.

    pi_n = (1 - eta)^n: eta = 1 is the vacuum projector, eta = 0 the
    identity (no information, the deterministic protocol).
    """
    eta = validate_efficiency(eta)
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    n = np.arange(n_max + 1, dtype=np.float64)
    if eta == 1.0:
        weights = np.zeros(n_max + 1)
        weights[0] = 1.0
    else:
        weights = (1.0 - eta) ** n
    return DiagonalPovm(weights)


def vacuum_projector(n_max: int) -> DiagonalPovm:
    """Projector onto the vacuum, the ideal-detector non-click element."""
    return make_nonclick_povm(1.0, n_max)


def identity_povm(n_max: int) -> DiagonalPovm:
    """Trivial measurement: always succeed (deterministic protocol)."""
    return make_nonclick_povm(0.0, n_max)


def _merge_raw(state, weights, table):
    if table is not None:
        needed = 2 * state.n_max
        if table.max_total_photons < needed:
            raise ValueError(
                "table covers total photon number %d but the merge needs %d"
                % (table.max_total_photons, needed)
            )
        n = state.probs.size
        p = state.probs
        q = np.zeros(2 * n - 1)
        for S in range(2 * n - 1):
            mlo, mhi = max(0, S - n + 1), min(S, n - 1)
            w = np.zeros(S + 1)
            w[mlo:mhi + 1] = p[mlo:mhi + 1] * p[S - mhi:S - mlo + 1][::-1]
            pi_rev = weights[S::-1]
            q[:S + 1] += (table.blocks[S] @ w) * pi_rev
        return q, float(q.sum())
    return _kernels.merge_fock(state.probs, weights, DEFAULT_BAND_TOL)


def merge(state: PhotonDistribution, povm: DiagonalPovm,
          table: BsTransitionTable | None = None, *,
          success_floor: float = DEFAULT_SUCCESS_FLOOR):
    """Interfere two copies of ``state`` and condition output two on ``povm``.

    Implements the nonlinear map

        q_j = sum_{m,n} p_m p_n B(j, m+n-j | m, n) pi_{m+n-j},
        out = q / p_succ,    p_succ = sum_j q_j.

    When ``table`` is given its cached blocks are used (it must cover
    total photon number 2 n_max); otherwise the blocks are generated on
    the fly, which keeps memory flat for large truncations.

    Returns ``(out, p_succ)``.  Raises VanishingSuccessError if p_succ
    falls below ``success_floor``.
    """
    if len(povm) < 2 * state.n_max + 1:
        raise ValueError(
            "POVM must cover photon numbers up to 2 n_max = %d, got length %d"
            % (2 * state.n_max, len(povm))
        )
    q, p_succ = _merge_raw(state, povm.weights, table)
    if p_succ < success_floor:
        raise VanishingSuccessError(
            "merge success probability %.3g below floor %.3g" % (p_succ, success_floor)
        )
    tail = min(1.0, 2.0 * state.tail_mass / p_succ) if state.tail_mass else 0.0
    return PhotonDistribution(q / p_succ, tail_mass=tail), p_succ


def merge_deterministic(state: PhotonDistribution,
                        table: BsTransitionTable | None = None) -> PhotonDistribution:
    """Merge without any conditioning measurement.

    Equivalent to :func:`merge` with the identity POVM; the success
    probability is 1 and the mean photon number is conserved exactly (a
    passive network followed by a partial trace cannot create energy).
    """
    povm = identity_povm(2 * state.n_max)
    out, _ = merge(state, povm, table)
    return out
