"""Closed-form link budget for the same physics the simulation samples.

Everything here is expectation-level arithmetic: Poisson click
probabilities per slot, Malus leakage through the analyzers, dark-count
admixture, Gaussian slot-spill, a non-paralyzable dead-time throughput
factor, and the standard asymptotic secret-fraction bound. The point of
the module is to be an independent route to the same observables the
Monte Carlo engine estimates, so simulation output can be checked against
it number by number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .config import SimConfig
from .detector import effective_fwhm, misassignment_probability
from .optics import malus_pass_probability, transmittance

__all__ = [
    "binary_entropy",
    "LinkBudget",
    "expected_link_budget",
    "qber_vs_clock_curve",
    "rate_vs_distance_curve",
    "max_secure_distance_km",
    "expected_reconciliation_leak",
    "expected_secret_length",
    "ERROR_CORRECTION_INEFFICIENCY",
]

# multiplier on the Shannon limit charged for interactive error correction
ERROR_CORRECTION_INEFFICIENCY = 1.2


def binary_entropy(x):
    """Shannon entropy of a biased bit, in bits; h(0) = h(1) = 0.

    Accepts scalars or arrays in [0, 1].
    """
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("binary_entropy argument must be in [0, 1]")
    h = -(xlogy(arr, arr) + xlogy(1.0 - arr, 1.0 - arr)) / math.log(2.0)
    return float(h) if h.ndim == 0 else h


@dataclass(frozen=True)
class LinkBudget:
    """Expected per-slot probabilities and steady-state rates for one setup.

    The three qber_* components partition qber_total exactly:

      * qber_optical: in-slot conclusives that fired the wrong analyzer
        (extinction leakage, and attacker-distorted states when present),
      * qber_dark: conclusives caused by a dark count, right half the time,
      * qber_timing: conclusives whose timestamp spilled into a
        neighboring slot, right half the time.
    """

    p_conclusive: float
    p_double: float
    qber_optical: float
    qber_dark: float
    qber_timing: float
    qber_total: float
    r_sift_cps: float
    r_net_cps: float
    fwhm_effective_ps: float
    misassignment_fraction: float
    deadtime_factor: float


def _eve_resend_distribution(cfg: SimConfig, scheme) -> np.ndarray:
    """P(state s leaves the attack station | Alice sent bit a), ideal taps.

    Rows indexed by a, columns by s. The attacker's two analyzer click
    counts on a Poisson pulse are independent Poisson variables with mean
    mu * pass / 2; a single-sided click resends that certified state, any
    other outcome resends a fair coin's state.
    """
    out = np.zeros((2, 2))
    for a in (0, 1):
        state = scheme.state_deg_for_bit(a)
        lam = [cfg.mu * 0.5 * malus_pass_probability(state, scheme.analyzer_deg_for_detector(d), math.inf)
               for d in (0, 1)]
        p_click = [1.0 - math.exp(-l) for l in lam]
        concl = [p_click[0] * (1.0 - p_click[1]), p_click[1] * (1.0 - p_click[0])]
        p_inconclusive = 1.0 - concl[0] - concl[1]
        for s in (0, 1):
            out[a, s] = concl[s] + 0.5 * p_inconclusive
    return out


def expected_link_budget(cfg: SimConfig) -> LinkBudget:
    """Closed-form per-slot statistics and key rates for one configuration.

    Model notes, in pipeline order:

      * Poisson pulse, multiplicative survival through fiber and detector
        efficiency: detector-side mean mu_eff = mu * t_channel * eta.
      * A slot carrying state s drives detector b as a Poisson click
        source of mean lambda_sb = mu_eff/2 * malus(s, b) plus the
        per-slot dark expectation. Each slot carries exactly one state,
        so an intercept-resend attacker's resend distribution mixes the
        per-state click PROBABILITIES, never the intensities: blending
        intensities would manufacture cross-state double-click terms no
        single pulse can produce.
      * Conclusive slot for bit b: detector b clicked, detector 1-b did
        not. Both clicking is a discarded double click.
      * Clicks caused by a photon inherit Gaussian timing spill with the
        module FWHM at the pre-dead-time click rate, sync jitter added in
        quadrature; dark-caused clicks are uniform, so half of each
        component's contribution is an error where noted.
      * Dead time multiplies throughput by 1 / (1 + rate * tau) per
        detector (non-paralyzable), applied to the sifted rate.
      * Net rate charges 1.2 * h(Q) for correction and h(Q) for hashing.
    """
    from .protocol import B92_SCHEME  # local import: protocol pulls entropy from here

    scheme = B92_SCHEME
    t_ch = transmittance(cfg.channel())
    mu_eff = cfg.mu * t_ch * cfg.efficiency
    period_ps = cfg.slot_period_ps()
    delta_dark = cfg.dark_count_rate_cps * period_ps * 1e-12

    # state mixture entering the fiber, per Alice bit
    if cfg.eve_fraction > 0.0:
        resend = _eve_resend_distribution(cfg, scheme)
        w = (1.0 - cfg.eve_fraction) * np.eye(2) + cfg.eve_fraction * resend
    else:
        w = np.eye(2)

    # lam_state[s, b]: photon-caused click intensity at detector b when the
    # slot carries state s
    lam_state = np.zeros((2, 2))
    for s in (0, 1):
        for b in (0, 1):
            lam_state[s, b] = 0.5 * mu_eff * malus_pass_probability(
                scheme.state_deg_for_bit(s),
                scheme.analyzer_deg_for_detector(b),
                cfg.extinction_ratio_db,
            )

    u_state = 1.0 - np.exp(-lam_state - delta_dark)    # any click at (s, b)
    photon_click = 1.0 - np.exp(-lam_state)            # at least one photon click
    dark_only = np.exp(-lam_state) * (1.0 - np.exp(-delta_dark))

    # conditioned on (a, s), weighted by the bit prior and the resend
    # distribution; concl[a, b] = conclusive for bit b given Alice sent a
    concl = np.zeros((2, 2))
    concl_signal = np.zeros((2, 2))
    concl_dark = np.zeros((2, 2))
    p_double = 0.0
    p_click_per_detector = 0.0
    for a in (0, 1):
        for s in (0, 1):
            weight = 0.5 * w[a, s]
            for b in (0, 1):
                quiet_other = 1.0 - u_state[s, 1 - b]
                concl[a, b] += weight * u_state[s, b] * quiet_other
                concl_signal[a, b] += weight * photon_click[s, b] * quiet_other
                concl_dark[a, b] += weight * dark_only[s, b] * quiet_other
            p_double += weight * u_state[s, 0] * u_state[s, 1]
            p_click_per_detector += weight * u_state[s, 0]

    p_conclusive = concl.sum()
    if p_conclusive <= 0.0:
        raise ValueError("configuration yields no conclusive events")

    w_signal = concl_signal.sum() / p_conclusive
    w_dark = concl_dark.sum() / p_conclusive
    total_signal = concl_signal.sum()
    err_optical = (concl_signal[0, 1] + concl_signal[1, 0]) / total_signal if total_signal else 0.0

    # pre-dead-time per-detector click rate feeds both the jitter width
    # and the dead-time throughput factor; detector 0 is representative
    # because the scheme is bit-symmetric
    rate_det_cps = p_click_per_detector * cfg.clock_ghz * 1e9
    fwhm_eff = effective_fwhm(cfg.jitter(), rate_det_cps)
    fwhm_total = math.hypot(fwhm_eff, cfg.sync_fwhm_ps)
    f_out = misassignment_probability(fwhm_total, cfg.clock_ghz)

    qber_dark = 0.5 * w_dark
    qber_timing = 0.5 * f_out * w_signal
    qber_optical = (1.0 - f_out) * err_optical * w_signal
    qber_total = qber_optical + qber_dark + qber_timing

    deadtime_factor = 1.0 / (1.0 + rate_det_cps * cfg.dead_time_ps * 1e-12)
    r_sift = p_conclusive * deadtime_factor * cfg.clock_ghz * 1e9
    secret_fraction = 1.0 - (ERROR_CORRECTION_INEFFICIENCY + 1.0) * binary_entropy(qber_total)
    r_net = r_sift * max(0.0, secret_fraction)

    return LinkBudget(
        p_conclusive=float(p_conclusive),
        p_double=float(p_double),
        qber_optical=float(qber_optical),
        qber_dark=float(qber_dark),
        qber_timing=float(qber_timing),
        qber_total=float(qber_total),
        r_sift_cps=float(r_sift),
        r_net_cps=float(r_net),
        fwhm_effective_ps=float(fwhm_eff),
        misassignment_fraction=float(f_out),
        deadtime_factor=float(deadtime_factor),
    )


def qber_vs_clock_curve(cfg: SimConfig, clocks_ghz) -> np.ndarray:
    """Expected total QBER at each clock frequency, other knobs fixed."""
    import dataclasses

    return np.array([
        expected_link_budget(dataclasses.replace(cfg, clock_ghz=float(c))).qber_total
        for c in np.asarray(clocks_ghz, dtype=float)
    ])


def rate_vs_distance_curve(cfg: SimConfig, distances_km):
    """Expected (sifted, net) rates in counts/s at each fiber length."""
    import dataclasses

    sift, net = [], []
    for d in np.asarray(distances_km, dtype=float):
        budget = expected_link_budget(dataclasses.replace(cfg, distance_km=float(d)))
        sift.append(budget.r_sift_cps)
        net.append(budget.r_net_cps)
    return np.array(sift), np.array(net)


def max_secure_distance_km(cfg: SimConfig, lo_km: float = 0.0, hi_km: float = 100.0,
                           tol_km: float = 1e-6) -> float:
    """Longest fiber with a positive net rate, located by bisection.

    The net rate decreases with distance and hits exactly 0 once the QBER
    crosses the secret-fraction zero; this finds that boundary to tol_km.
    Raises if the rate is already 0 at lo_km or still positive at hi_km.
    """
    import dataclasses

    def net(d):
        return expected_link_budget(dataclasses.replace(cfg, distance_km=d)).r_net_cps

    if net(lo_km) <= 0.0:
        raise ValueError(f"net rate already zero at {lo_km} km")
    if net(hi_km) > 0.0:
        raise ValueError(f"net rate still positive at {hi_km} km; widen the bracket")
    lo, hi = lo_km, hi_km
    while hi - lo > tol_km:
        mid = 0.5 * (lo + hi)
        if net(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _search_cost(block_size: int) -> int:
    return math.ceil(math.log2(block_size)) if block_size > 1 else 0


def _odd_error_probability(block_size: int, error_rate: float) -> float:
    # P(odd # of flips among k iid Bernoulli(e)) = (1 - (1-2e)^k) / 2
    return 0.5 * (1.0 - (1.0 - 2.0 * error_rate) ** block_size)


def expected_reconciliation_leak(n: int, qber: float, passes: int = 4) -> float:
    """Expected parity disclosures of the block-parity protocol.

    Expectation-level bookkeeping of the same schedule the interactive
    corrector runs: every pass discloses one parity per block; pass-1 odd
    blocks each cost one binary search; an odd block in a later pass pins
    the error found there AND one earlier-pass partner through
    back-tracking, so it is charged both searches and removes two errors.
    The final whole-key verification parity adds one.
    """
    if n <= 0:
        raise ValueError("n must be > 0")
    if not 0.0 <= qber < 0.5:
        raise ValueError("qber must be in [0, 0.5)")
    e = qber
    if e <= 0.73 / n:
        k1 = n
    else:
        k1 = max(1, round(0.73 / e))
    leak = 0.0
    errors = n * e
    for p in range(passes):
        k = min(k1 << p, n)
        blocks = -(-n // k)
        leak += blocks
        p_odd = _odd_error_probability(k, errors / n)
        odd_blocks = blocks * p_odd
        if p == 0:
            leak += odd_blocks * _search_cost(k)
            errors = max(errors - odd_blocks, 0.0)
        else:
            pairs = min(odd_blocks, errors / 2.0)
            leak += pairs * (_search_cost(k) + _search_cost(k1))
            errors = max(errors - 2.0 * pairs, 0.0)
    return leak + 1.0


def expected_secret_length(n_sifted: int, qber: float, cfg: SimConfig) -> float:
    """Expected final key length after estimation, correction and hashing.

    Follows the run pipeline's arithmetic: the disclosed estimation sample
    is removed, the reconciliation leak is subtracted along with the
    ceil(n * h(e)) hashing charge and the safety margin, and the result is
    floored at zero.
    """
    if n_sifted <= 0:
        return 0.0
    n_disclosed = min(n_sifted, max(1, round(cfg.sample_fraction * n_sifted)))
    n_rec = n_sifted - n_disclosed
    if n_rec <= 0:
        return 0.0
    leak = expected_reconciliation_leak(n_rec, qber, cfg.cascade_passes)
    m = n_rec - leak - math.ceil(n_rec * binary_entropy(qber)) - cfg.security_parameter
    return max(0.0, m)
