"""Iterated Gaussification runs, their diagnostics, and the closed-form
asymptotics.

A protocol run repeats the elementary merge step N times, consuming 2^N
copies of the input state.  Heralded mode conditions every step on the
non-click of a detector with efficiency eta (success is probabilistic);
deterministic mode applies no measurement (the quadrature of the final
state is then a balanced sum of 2^N independent copies, so its excess
kurtosis halves exactly at every step).

Asymptotics for convergent heralded runs: with

    p0' = sum_n p_n (1 - eta)^n,
    p1' = sum_n n eta (1 - eta)^(n-1) p_n

(the vacuum and single-photon probabilities of the loss-attenuated
input), the protocol converges iff p0' > p1', to a thermal state of mean

    n_inf = p1' / (eta (p0' - p1')).

The same number also follows from the asymptotic covariance-matrix
formula evaluated on 2x2 phase-invariant covariance matrices, which
:func:`predict_asymptote_via_covariance` does literally as a
cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .interference import (
    DEFAULT_SUCCESS_FLOOR,
    identity_povm,
    make_nonclick_povm,
    merge,
)
from .states import (
    PhotonDistribution,
    excess_kurtosis,
    fidelity_to_thermal,
    photon_moments,
    statistical_distance_to_gaussian,
    validate_efficiency,
)

#: Default bound on the number of iterations (2^N input copies!).
DEFAULT_MAX_ITERATIONS = 12

#: Per-step trimming tolerance used when compacting merge outputs.
DEFAULT_STEP_TRUNC_TOL = 1e-15

MODES = ("heralded", "deterministic")


@dataclass(frozen=True)
class ProtocolConfig:
    """Configuration of one protocol run.

    ``trunc_cap`` bounds the photon-number cutoff carried through the
    run.  Since each merge doubles the support before trimming, a cap
    below 2^N n_max(input) can in principle bite; constructing such a
    config requires ``acknowledge_truncation=True``, and any mass
    actually discarded at the cap is reported in the trace rather than
    silently renormalized away.
    """

    input_state: PhotonDistribution
    detector_eta: float = 1.0
    iterations: int = 1
    mode: str = "heralded"
    trunc_cap: int = 4096
    trunc_tol: float = DEFAULT_STEP_TRUNC_TOL
    success_floor: float = DEFAULT_SUCCESS_FLOOR
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    acknowledge_truncation: bool = True
    compute_distance: bool = True

    def __post_init__(self):
        validate_efficiency(self.detector_eta, "detector_eta")
        if self.mode not in MODES:
            raise ValueError("mode must be one of %s" % (MODES,))
        if not 0 <= self.iterations <= self.max_iterations:
            raise ValueError(
                "iterations must lie in 0..%d (raise max_iterations explicitly "
                "if you really want more)" % self.max_iterations
            )
        if self.trunc_cap < self.input_state.n_max:
            raise ValueError("trunc_cap is below the input state's cutoff")
        full = self.input_state.n_max * 2 ** self.iterations
        if self.trunc_cap < full and not self.acknowledge_truncation:
            raise ValueError(
                "trunc_cap %d cannot hold the untrimmed support %d; pass "
                "acknowledge_truncation=True to accept reported tail mass"
                % (self.trunc_cap, full)
            )


@dataclass(frozen=True)
class IterationRecord:
    """Snapshot and diagnostics after one protocol step (j = 0 is the input)."""

    j: int
    state: PhotonDistribution
    mean: float
    variance_n: float
    kurtosis: float
    distance: float
    fidelity_thermal: float
    p_succ: float
    log_p_tot: float
    tail_mass: float
    cap_saturated: bool

    @property
    def p_tot(self) -> float:
        return math.exp(self.log_p_tot)


@dataclass(frozen=True)
class IterationTrace:
    """Per-iteration records plus run-level outcome flags."""

    config: ProtocolConfig
    records: tuple
    cap_saturated: bool

    @property
    def final_state(self) -> PhotonDistribution:
        return self.records[-1].state

    @property
    def p_tot(self) -> float:
        """Total success probability of the whole run (may underflow to 0)."""
        return self.records[-1].p_tot

    @property
    def log_p_tot(self) -> float:
        return self.records[-1].log_p_tot

    def step_probabilities(self):
        return [rec.p_succ for rec in self.records[1:]]


def total_success_probability(step_probs, log=False):
    """prod_j p_j^(2^(N-j)): all 2^N - 1 heralding events must co-occur."""
    n_steps = len(step_probs)
    log_total = sum(2.0 ** (n_steps - j) * math.log(p)
                    for j, p in enumerate(step_probs, start=1))
    return log_total if log else math.exp(log_total)


def _trim(state: PhotonDistribution, tol: float, cap: int):
    """Drop the negligible tail of a distribution; account for it honestly."""
    p = state.probs
    tail = np.cumsum(p[::-1])[::-1]
    keep = np.nonzero(tail > tol)[0]
    n_keep = int(keep[-1]) + 1 if keep.size else 1
    saturated = n_keep > cap + 1
    n_keep = min(n_keep, cap + 1)
    if n_keep == p.size:
        return state, False
    dropped = float(tail[n_keep])
    return (
        PhotonDistribution(p[:n_keep] / p[:n_keep].sum(),
                           tail_mass=min(1.0, state.tail_mass + dropped)),
        saturated,
    )


def _diagnostics(j, state, p_succ, log_p_tot, config, saturated):
    mean, var_n, _ = photon_moments(state)
    distance = (statistical_distance_to_gaussian(state)
                if config.compute_distance else math.nan)
    return IterationRecord(
        j=j,
        state=state,
        mean=mean,
        variance_n=var_n,
        kurtosis=excess_kurtosis(state),
        distance=distance,
        fidelity_thermal=fidelity_to_thermal(state),
        p_succ=p_succ,
        log_p_tot=log_p_tot,
        tail_mass=state.tail_mass,
        cap_saturated=saturated,
    )


def run_protocol(config: ProtocolConfig) -> IterationTrace:
    """Execute a full Gaussification run and record per-step diagnostics."""
    state = config.input_state
    records = [_diagnostics(0, state, 1.0, 0.0, config, False)]
    log_p_tot = 0.0
    any_saturated = False
    for j in range(1, config.iterations + 1):
        if config.mode == "heralded":
            povm = make_nonclick_povm(config.detector_eta, 2 * state.n_max)
        else:
            povm = identity_povm(2 * state.n_max)
        out, p_succ = merge(state, povm, success_floor=config.success_floor)
        state, saturated = _trim(out, config.trunc_tol, config.trunc_cap)
        any_saturated = any_saturated or saturated
        if config.mode == "deterministic":
            p_succ = 1.0
        # running total as if step j were the last: L_j = 2 L_{j-1} + ln p_j
        log_p_tot = 2.0 * log_p_tot + math.log(p_succ)
        records.append(_diagnostics(j, state, p_succ, log_p_tot, config, saturated))
    return IterationTrace(config=config, records=tuple(records),
                          cap_saturated=any_saturated)


@dataclass(frozen=True)
class AsymptotePrediction:
    """Outcome of the convergence analysis for a heralded protocol."""

    converges: bool
    mean_photons: float | None = None


def _attenuated_low_probs(state: PhotonDistribution, eta: float):
    """p0' and p1' of the loss-attenuated state, without forming it."""
    n = np.arange(state.probs.size, dtype=np.float64)
    if eta == 1.0:
        p0 = float(state.probs[0])
        p1 = float(state.probs[1]) if state.probs.size > 1 else 0.0
        return p0, p1
    t = 1.0 - eta
    tn = t ** n
    p0 = float(tn @ state.probs)
    p1 = float(eta * (n[1:] * t ** (n[1:] - 1.0)) @ state.probs[1:]) if state.probs.size > 1 else 0.0
    return p0, p1


# margins tighter than this are treated as "at threshold": the asymptote
# formula has a pole there and truncated inputs cannot resolve the sign
_CONVERGENCE_MARGIN = 1e-9


def predict_asymptote(state: PhotonDistribution, eta) -> AsymptotePrediction:
    """Convergence test and asymptotic thermal mean for heralded runs.

    eta = 0 is rejected: without heralding information the protocol is
    the deterministic one and this formula does not apply.
    """
    eta = validate_efficiency(eta)
    if eta == 0.0:
        raise ValueError("asymptote prediction requires a heralding detector "
                         "with eta > 0")
    p0, p1 = _attenuated_low_probs(state, eta)
    if p0 - p1 <= _CONVERGENCE_MARGIN * p0:
        return AsymptotePrediction(converges=False)
    return AsymptotePrediction(True, p1 / (eta * (p0 - p1)))


def predict_asymptote_via_covariance(state: PhotonDistribution, eta) -> float:
    """Asymptotic mean from the covariance fixed-point formula.

    Evaluates

        G_inf = (G_P - i W) (G_P - G_s)^(-1) (G_P + i W) - G_P

    on actual 2x2 matrices, where G_P and G_s are the covariance
    matrices of the normalized non-click element and of the conditioned
    input, both proportional to the identity for phase-insensitive
    states, and W is the symplectic form.  Returns (G_inf[0,0] - 1)/2
    after checking the result is a real multiple of the identity.
    """
    eta = validate_efficiency(eta)
    if not 0.0 < eta < 1.0:
        raise ValueError("covariance route requires eta strictly inside (0, 1)")
    p0, p1 = _attenuated_low_probs(state, eta)
    nbar_povm = (1.0 - eta) / eta
    nbar_sigma = (1.0 - eta) * p1 / (eta * p0)
    gamma_p = (1.0 + 2.0 * nbar_povm) * np.eye(2)
    gamma_s = (1.0 + 2.0 * nbar_sigma) * np.eye(2)
    symp = np.array([[0.0, 1.0], [-1.0, 0.0]])
    diff = gamma_p - gamma_s
    if np.linalg.det(diff) <= 0.0 or diff[0, 0] <= 0.0:
        raise ValueError("input is not in the convergent regime")
    gamma_inf = ((gamma_p - 1j * symp) @ np.linalg.inv(diff) @ (gamma_p + 1j * symp)
                 - gamma_p)
    # near eta = 1 the formula is a 0/0 limit, so these sanity checks are
    # loose; the 1e-9 agreement with the direct route is asserted in tests
    # away from the degenerate edge
    scale = np.abs(gamma_inf).max()
    if not np.allclose(gamma_inf.imag / scale, 0.0, atol=1e-6):
        raise AssertionError("asymptotic covariance acquired an imaginary part")
    gamma_inf = gamma_inf.real
    if not np.allclose(gamma_inf / scale, gamma_inf[0, 0] / scale * np.eye(2), atol=1e-6):
        raise AssertionError("asymptotic covariance is not phase-invariant")
    return float((gamma_inf[0, 0] - 1.0) / 2.0)


def success_bounds(mean_photons_in, eta):
    """Bounds on every single-step success probability for Poisson inputs.

    Returns (max(0, 1 - eta mu), 1/(1 + eta mu)).  The lower edge is
    also the asymptotic per-step success probability of a convergent
    run.
    """
    eta = validate_efficiency(eta)
    mu = float(mean_photons_in)
    if mu < 0.0:
        raise ValueError("mean photon number must be >= 0")
    x = eta * mu
    return max(0.0, 1.0 - x), 1.0 / (1.0 + x)


def ehd_reduction_factor(eta, eta_bhd, simultaneous: int = 1) -> float:
    """Success-probability penalty of emulating the non-click measurement
    with eight-port homodyne detection.

    Each heralding measurement keeps an outcome with probability
    1 - eta/eta_bhd; ``simultaneous`` of them give the product.  Requires
    eta < eta_bhd (otherwise the emulation cannot reach efficiency eta).
    """
    eta = validate_efficiency(eta, "eta")
    eta_bhd = validate_efficiency(eta_bhd, "eta_bhd")
    if simultaneous < 1:
        raise ValueError("simultaneous must be >= 1")
    if eta >= eta_bhd:
        raise ValueError("emulation requires eta < eta_bhd")
    return (1.0 - eta / eta_bhd) ** simultaneous
