"""Seeded Monte Carlo executor: full trials, sweeps, analytic cross-checks.

A trial walks the whole chain: random bits -> pulse train -> optional
intercept-resend attacker -> fiber loss -> receiver optics -> detectors
(efficiency, jitter, darks, dead time) -> slot assignment -> sifting ->
error estimation -> interactive correction -> Toeplitz compression. Counts
in the RunReport are exact tallies of what happened, never expectations.

Everything is vectorized over photons and clicks rather than slots: pulse
numbers are Poisson and fiber survival is an independent per-photon coin,
so the survivors reaching the receiver are themselves Poisson with iid
uniform slot labels. That identity lets the per-slot loop collapse while
leaving every distribution exact, and it is what makes 10^8-slot runs
cheap: work scales with photons and clicks, not clock ticks.

Randomness is split into named child streams of one root seed (bits, eve,
source, optics, detector, dark, protocol), so any stage can be replayed
or swapped without disturbing the draws of the others.
"""

from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .analytic import (
    LinkBudget,
    binary_entropy,
    expected_link_budget,
    expected_reconciliation_leak,
)
from .config import SimConfig
from .detector import (
    TimingHistogram,
    assign_slot,
    dark_arrival_times,
    dead_time_filter,
    effective_fwhm,
    sample_arrival,
)
from .optics import transmittance
from .protocol import (
    B92_SCHEME,
    ReconciliationError,
    bob_measure,
    cascade_reconcile,
    estimate_qber,
    eve_intercept_resend,
    privacy_amplify,
    sift,
)

__all__ = [
    "RunReport",
    "ComparisonRow",
    "run_trial",
    "sweep",
    "sweep_point_seed",
    "compare_to_analytic",
]

_STREAM_NAMES = ("bits", "eve", "source", "optics", "detector", "dark", "protocol")

# residual histogram layout: fixed so reports of equal configs align
_HIST_BIN_PS = 10.0
_HIST_SPAN_PS = 2500.0

CSV_COLUMNS = [
    "slots_simulated", "photons_launched", "photons_detected",
    "conclusive_count", "double_click_count", "sifted_length",
    "qber_measured", "qber_estimate", "leaked_bits", "secret_length",
    "r_sift_cps", "r_net_cps", "wall_time_s", "failure",
]


@dataclass(frozen=True, eq=False)
class RunReport:
    """Exact tallies of one simulated exchange.

    `timing_histogram` bins timestamp-minus-true-arrival residuals of
    accepted photon-caused clicks (dark clicks have no true arrival).
    `failure` is None for a completed run; a protocol abort (estimated
    error rate >= 0.5, key exhausted before correction) leaves the
    channel-stage tallies filled, zeroes the secret side, and stores the
    reason here instead of raising.

    Rate identities hold exactly: r_sift_cps = sifted_length *
    clock_ghz * 1e9 / slots_simulated, and likewise r_net_cps from
    secret_length.
    """

    config: SimConfig
    slots_simulated: int
    photons_launched: int
    photons_detected: int
    dark_count: int
    out_of_frame_count: int
    conclusive_count: int
    double_click_count: int
    sifted_length: int
    qber_measured: float
    qber_estimate: float
    disclosed_count: int
    leaked_bits: int
    secret_length: int
    r_sift_cps: float
    r_net_cps: float
    wall_time_s: float
    timing_histogram: TimingHistogram = field(repr=False)
    failure: str | None = None

    def signature(self) -> tuple:
        """Everything determinism promises: all fields except wall time."""
        scalars = tuple(
            getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("wall_time_s", "timing_histogram", "config")
        )
        hist = self.timing_histogram
        return scalars + (self.config, hist.bin_width_ps, hist.start_ps,
                          tuple(hist.counts.tolist()))

    def to_csv_row(self) -> list:
        row = []
        for name in CSV_COLUMNS:
            value = getattr(self, name)
            row.append("" if value is None else value)
        return row

    def to_kv_text(self) -> str:
        """Flat key = value record of every scalar field."""
        lines = []
        for f in dataclasses.fields(self):
            if f.name in ("timing_histogram", "config"):
                continue
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {'none' if value is None else value}")
        return "\n".join(lines) + "\n"


def _spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAM_NAMES))
    return {name: np.random.default_rng(child)
            for name, child in zip(_STREAM_NAMES, children)}


def run_trial(cfg: SimConfig) -> RunReport:
    """Simulate one complete key exchange under `cfg`.

    Deterministic in (config, seed): reruns produce field-identical
    reports up to wall time, regardless of worker count or scheduling.
    """
    t_start = time.perf_counter()
    rng = _spawn_streams(cfg.seed)
    scheme = B92_SCHEME
    n = cfg.n_slots
    period = cfg.slot_period_ps()
    duration_ps = n * period

    alice_bits = rng["bits"].integers(0, 2, size=n, dtype=np.uint8)

    # state each slot carries into the fiber
    if cfg.eve_fraction > 0.0:
        slot_angles, _, _ = eve_intercept_resend(
            alice_bits, cfg.mu, cfg.eve_fraction, rng["eve"], scheme)
    else:
        slot_angles = None

    # pulse photon numbers are Poisson and fiber survival is iid, so the
    # photons reaching the receiver are Poisson-thinned with uniform slots
    t_ch = transmittance(cfg.channel())
    photons_launched = int(rng["source"].poisson(n * cfg.mu))
    photons_at_receiver = int(rng["source"].binomial(photons_launched, t_ch))
    ph_slots = rng["source"].integers(0, n, size=photons_at_receiver)
    if slot_angles is not None:
        ph_angles = slot_angles[ph_slots]
    else:
        ph_angles = np.where(alice_bits[ph_slots] == 1,
                             scheme.bit1_deg, scheme.bit0_deg)

    # receiver optics, then detector efficiency
    det_slots, det_arm = bob_measure(ph_slots, ph_angles, rng["optics"],
                                     scheme, cfg.extinction_ratio_db)
    eff_kept = rng["detector"].random(det_slots.size) < cfg.efficiency
    det_slots, det_arm = det_slots[eff_kept], det_arm[eff_kept]
    photons_detected = int(det_slots.size)

    dark_times = [dark_arrival_times(cfg.dark_count_rate_cps, duration_ps, rng["dark"])
                  for _ in (0, 1)]
    dark_count = int(dark_times[0].size + dark_times[1].size)

    # rate-dependent jitter width from the pre-dead-time click rate
    rate_det_cps = 0.5 * (photons_detected + dark_count) / (duration_ps * 1e-12)
    fwhm_eff = effective_fwhm(cfg.jitter(), rate_det_cps)
    true_times = det_slots.astype(float) * period
    stamps = sample_arrival(true_times, fwhm_eff, cfg.sync_fwhm_ps, rng["detector"])

    out_of_frame = 0
    residuals = []
    rec_slots, rec_bits = [], []
    conclusive_count = 0
    for d in (0, 1):
        is_d = det_arm == d
        t = np.concatenate([np.atleast_1d(stamps)[is_d], dark_times[d]])
        true = np.concatenate([true_times[is_d], np.full(dark_times[d].size, np.nan)])
        order = np.argsort(t, kind="stable")
        t, true = t[order], true[order]
        keep = dead_time_filter(t, cfg.dead_time_ps)
        t, true = t[keep], true[keep]

        slots_d = assign_slot(t, cfg.clock_ghz)
        slots_d = np.atleast_1d(slots_d)
        in_frame = (slots_d >= 0) & (slots_d < n)
        out_of_frame += int((~in_frame).sum())
        slots_d, t, true = slots_d[in_frame], t[in_frame], true[in_frame]

        residuals.append((t - true)[~np.isnan(true)])

        # several accepted clicks in one slot on one detector are a single
        # conclusive outcome; t is time-sorted, so unique keeps the earliest
        uniq_slots, first_idx = np.unique(slots_d, return_index=True)
        conclusive_count += int(uniq_slots.size)
        rec_slots.append(uniq_slots)
        rec_bits.append(np.full(uniq_slots.size, d, dtype=np.uint8))

    # a slot claimed by both detectors is a double click: discard both
    both = np.intersect1d(rec_slots[0], rec_slots[1], assume_unique=True)
    double_click_count = int(both.size)
    if double_click_count:
        keep0 = ~np.isin(rec_slots[0], both)
        keep1 = ~np.isin(rec_slots[1], both)
        rec_slots = [rec_slots[0][keep0], rec_slots[1][keep1]]
        rec_bits = [rec_bits[0][keep0], rec_bits[1][keep1]]

    histogram = TimingHistogram.from_samples(
        np.concatenate(residuals) if residuals else np.empty(0),
        _HIST_BIN_PS, -_HIST_SPAN_PS, _HIST_SPAN_PS)

    key = sift(alice_bits, np.concatenate(rec_slots), np.concatenate(rec_bits))
    sifted_length = len(key)
    qber_measured = key.mismatch_rate()

    def report(*, qber_estimate=0.0, disclosed=0, leaked=0, secret=0, failure=None):
        per_second = cfg.clock_ghz * 1e9 / n
        return RunReport(
            config=cfg,
            slots_simulated=n,
            photons_launched=photons_launched,
            photons_detected=photons_detected,
            dark_count=dark_count,
            out_of_frame_count=out_of_frame,
            conclusive_count=conclusive_count,
            double_click_count=double_click_count,
            sifted_length=sifted_length,
            qber_measured=qber_measured,
            qber_estimate=qber_estimate,
            disclosed_count=disclosed,
            leaked_bits=leaked,
            secret_length=secret,
            r_sift_cps=sifted_length * per_second,
            r_net_cps=secret * per_second,
            wall_time_s=time.perf_counter() - t_start,
            timing_histogram=histogram,
            failure=failure,
        )

    if sifted_length == 0:
        return report(failure="no conclusive events survived sifting")

    est, disclosed_idx = estimate_qber(key, cfg.sample_fraction, rng["protocol"])
    remaining = np.ones(sifted_length, dtype=bool)
    remaining[disclosed_idx] = False
    a_rem = key.alice_bits[remaining]
    b_rem = key.bob_bits[remaining]

    try:
        corrected, rec_report = cascade_reconcile(
            a_rem, b_rem, est, rng["protocol"], cfg.cascade_passes)
    except (ReconciliationError, ValueError) as exc:
        return report(qber_estimate=est, disclosed=int(disclosed_idx.size),
                      failure=str(exc))
    if not rec_report.verified:
        return report(qber_estimate=est, disclosed=int(disclosed_idx.size),
                      leaked=rec_report.leaked_bits,
                      failure="reconciliation verification parity mismatch")

    hash_seed = int(rng["protocol"].integers(0, 2**63))
    secret = privacy_amplify(corrected, rec_report.leaked_bits, est,
                             hash_seed, cfg.security_parameter)
    return report(qber_estimate=est, disclosed=int(disclosed_idx.size),
                  leaked=rec_report.leaked_bits, secret=len(secret))


def sweep_point_seed(base_seed: int, point_index: int) -> int:
    """Root seed for one sweep point.

    Feeds (base_seed, point_index) through the numpy SeedSequence
    avalanche mixer and takes one 64-bit word. Points therefore own
    disjoint, order-independent stream families: the same point index
    always yields the same seed, and neighboring indices share nothing.
    (Bit-exact cross-language equality is not promised, only structural
    reproducibility of the rule.)
    """
    ss = np.random.SeedSequence([int(base_seed), int(point_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def sweep(base_config: SimConfig, axis_name: str, values, workers: int = 1) -> list[RunReport]:
    """One trial per axis value, each under its own derived seed.

    Args:
        base_config: template configuration.
        axis_name: SimConfig field to vary.
        values: sequence of values for that field; empty gives [].
        workers: process count; results are identical for any value.

    Raises:
        ValueError: unknown axis name (message lists the valid ones), or
            an axis value that fails the config's own validation.
    """
    field_names = [f.name for f in dataclasses.fields(SimConfig)]
    if axis_name not in field_names:
        raise ValueError(
            f"unknown sweep axis {axis_name!r}; valid axes: {', '.join(field_names)}")
    values = list(values)
    configs = []
    for i, v in enumerate(values):
        seed = sweep_point_seed(base_config.seed, i)
        configs.append(dataclasses.replace(base_config, **{axis_name: v}, seed=seed))
    if not configs:
        return []
    if workers <= 1:
        return [run_trial(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_trial, configs))


class ComparisonRow(NamedTuple):
    quantity: str
    measured: float
    expected: float
    z_score: float


def compare_to_analytic(report: RunReport, budget: LinkBudget) -> list[ComparisonRow]:
    """Score every report quantity against its closed-form expectation.

    Channel-side counts carry exact binomial/Poisson standard errors. The
    reconciliation leak and secret length are compared against the
    expectation model conditioned on the report's own sifted/disclosed
    counts; their sigmas combine the sampling noise of the disclosed
    error-rate estimate (propagated through the model's slope), a 5%
    model-systematic term, and the trial-to-trial spread. |z| <= 3 on
    every row is the agreement gate.

    A failed run (report.failure set) compares only the channel-side
    quantities.
    """
    cfg = report.config
    n = report.slots_simulated
    rows: list[ComparisonRow] = []

    def add(name, measured, expected, sigma):
        z = 0.0 if measured == expected else (measured - expected) / sigma
        rows.append(ComparisonRow(name, float(measured), float(expected), float(z)))

    # channel side ------------------------------------------------------
    exp_launched = n * cfg.mu
    add("photons_launched", report.photons_launched, exp_launched,
        math.sqrt(exp_launched))

    # each photon reaches a detector with (pass0 + pass1)/2 * efficiency;
    # both signal states sit 45 deg from one analyzer and 90 deg from the
    # other, so the mean analyzer pass is (1/2 + extinction)/2 regardless
    # of the attacker
    eps = 0.0 if math.isinf(cfg.extinction_ratio_db) else 10 ** (-cfg.extinction_ratio_db / 10)
    t_ch = transmittance(cfg.channel())
    exp_detected = n * cfg.mu * t_ch * cfg.efficiency * (0.5 + eps) / 2.0
    add("photons_detected", report.photons_detected, exp_detected,
        math.sqrt(exp_detected))

    p_sift = budget.p_conclusive * budget.deadtime_factor
    add("sifted_length", report.sifted_length, n * p_sift,
        math.sqrt(n * p_sift * (1.0 - p_sift)))
    add("r_sift_cps", report.r_sift_cps, budget.r_sift_cps,
        math.sqrt(n * p_sift * (1.0 - p_sift)) * cfg.clock_ghz * 1e9 / n)

    exp_double = n * budget.p_double
    add("double_click_count", report.double_click_count, exp_double,
        math.sqrt(max(exp_double, 1.0)))

    q = budget.qber_total
    sigma_q = math.sqrt(q * (1.0 - q) / max(report.sifted_length, 1))
    add("qber_measured", report.qber_measured, q, sigma_q)

    if report.failure is not None:
        return rows

    # secret side -------------------------------------------------------
    n_rec = report.sifted_length - report.disclosed_count
    sigma_est = math.sqrt(q * (1.0 - q) / max(report.disclosed_count, 1))

    exp_leak = expected_reconciliation_leak(n_rec, q, cfg.cascade_passes)
    lo = expected_reconciliation_leak(n_rec, max(q - sigma_est, 0.0), cfg.cascade_passes)
    hi = expected_reconciliation_leak(n_rec, min(q + sigma_est, 0.499), cfg.cascade_passes)
    slope_term = 0.5 * abs(hi - lo)
    sigma_leak = math.sqrt(slope_term**2 + (0.05 * exp_leak)**2 + exp_leak)
    add("leaked_bits", report.leaked_bits, exp_leak, sigma_leak)

    exp_secret = max(0.0, n_rec - exp_leak - math.ceil(n_rec * binary_entropy(q))
                     - cfg.security_parameter)
    if 0.0 < q < 1.0:
        entropy_slope = n_rec * abs(math.log2((1.0 - q) / q)) * sigma_est
    else:
        entropy_slope = 0.0
    sigma_secret = math.sqrt(sigma_leak**2 + entropy_slope**2)
    add("secret_length", report.secret_length, exp_secret, max(sigma_secret, 1.0))
    add("r_net_cps", report.r_net_cps,
        exp_secret * cfg.clock_ghz * 1e9 / n,
        max(sigma_secret, 1.0) * cfg.clock_ghz * 1e9 / n)

    return rows
