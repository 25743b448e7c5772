"""Single-photon detector timing model.

A detected photon's timestamp wanders from its true arrival by Gaussian
jitter whose width is a property of the detector module: a "standard"
module whose response broadens with counting rate, and an "enhanced"
module that stays flat. Receiver-side clock recovery adds one more
independent Gaussian, folded in quadrature. Timestamps are then binned
into clock slots, so jitter beyond half a slot period misassigns the
event to a neighboring slot. Dark counts arrive uniformly in time, and a
non-paralyzable dead time suppresses any click closer than dead_time_ps
to the previous accepted click on the same detector.

Conventions:
  * FWHM <-> sigma for a Gaussian: fwhm = 2*sqrt(2*ln 2) * sigma.
  * The counting rate driving the rate-dependent broadening is the
    per-detector click rate BEFORE dead-time filtering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

__all__ = [
    "FWHM_PER_SIGMA",
    "JitterProfile",
    "STANDARD_JITTER",
    "ENHANCED_JITTER",
    "SpadModel",
    "DetectionEvent",
    "TimingHistogram",
    "FwhmEstimationError",
    "effective_fwhm",
    "sample_arrival",
    "dark_arrival_times",
    "dead_time_filter",
    "detect",
    "assign_slot",
    "misassignment_probability",
    "histogram_fwhm",
]

# 2*sqrt(2*ln 2) = 2.3548...: Gaussian FWHM in units of sigma
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class FwhmEstimationError(ValueError):
    """Histogram shape does not support a half-maximum width estimate."""


@dataclass(frozen=True)
class JitterProfile:
    """Timing response of one detector module family.

    The effective FWHM is `base_fwhm_ps` up to `knee_cps`, then grows by
    `slope_ps_per_mcps` picoseconds per Mcount/s above the knee. A flat
    module is expressed with slope 0.
    """

    name: str
    base_fwhm_ps: float
    knee_cps: float = 500_000.0
    slope_ps_per_mcps: float = 0.0

    def __post_init__(self):
        if not (self.base_fwhm_ps > 0 and math.isfinite(self.base_fwhm_ps)):
            raise ValueError("base_fwhm_ps must be positive and finite")
        if self.knee_cps <= 0:
            raise ValueError("knee_cps must be > 0")
        if self.slope_ps_per_mcps < 0:
            raise ValueError("slope_ps_per_mcps must be >= 0")


# Module presets: the broadening-prone standard module and the flat
# actively-quenched enhanced module.
STANDARD_JITTER = JitterProfile("standard", base_fwhm_ps=570.0, knee_cps=500_000.0, slope_ps_per_mcps=60.0)
ENHANCED_JITTER = JitterProfile("enhanced", base_fwhm_ps=370.0, knee_cps=500_000.0, slope_ps_per_mcps=0.0)


@dataclass(frozen=True)
class SpadModel:
    """One detector channel: efficiency, noise, dead time, timing response.

    `sync_fwhm_ps` is the receiver clock-recovery jitter shared by both
    slot timing and timestamping; it adds to the module jitter in
    quadrature and may be 0.
    """

    efficiency: float
    dark_count_rate_cps: float
    dead_time_ps: float
    jitter: JitterProfile
    sync_fwhm_ps: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.efficiency <= 1.0):
            raise ValueError("efficiency must be in (0, 1]")
        if self.dark_count_rate_cps < 0:
            raise ValueError("dark_count_rate_cps must be >= 0")
        if self.dead_time_ps < 0:
            raise ValueError("dead_time_ps must be >= 0")
        if self.sync_fwhm_ps < 0:
            raise ValueError("sync_fwhm_ps must be >= 0")


@dataclass(frozen=True)
class DetectionEvent:
    """One accepted click: which detector, when, and why (diagnostic)."""

    detector: int          # 0 or 1
    timestamp_ps: float
    origin: str            # "signal" or "dark"


def effective_fwhm(profile: JitterProfile, rate_cps: float) -> float:
    """Module FWHM at a given pre-dead-time counting rate.

    base + slope * max(0, rate - knee) / 1e6. Continuous at the knee and
    non-decreasing in rate.
    """
    if rate_cps < 0:
        raise ValueError("rate_cps must be >= 0")
    excess_mcps = max(0.0, rate_cps - profile.knee_cps) / 1e6
    return profile.base_fwhm_ps + profile.slope_ps_per_mcps * excess_mcps


def sample_arrival(true_time_ps, fwhm_ps, sync_fwhm_ps, rng: np.random.Generator):
    """Jitter true arrival times into measured timestamps.

    Detector and sync jitters are independent Gaussians, so the combined
    width is sqrt(fwhm^2 + sync^2) and sigma = fwhm / (2*sqrt(2*ln 2)).
    Accepts scalars or arrays (fwhm may vary per event); mean offset is 0.
    """
    t = np.asarray(true_time_ps, dtype=float)
    total_fwhm = np.hypot(np.asarray(fwhm_ps, dtype=float), np.asarray(sync_fwhm_ps, dtype=float))
    if np.any(total_fwhm < 0):
        raise ValueError("jitter FWHM must be >= 0")
    sigma = total_fwhm / FWHM_PER_SIGMA
    out = t + rng.standard_normal(t.shape if t.ndim else None) * sigma
    return float(out) if np.ndim(out) == 0 else out


def dark_arrival_times(rate_cps: float, window_ps: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform dark-count arrival times in [0, window_ps); Poisson count."""
    if rate_cps < 0 or window_ps < 0:
        raise ValueError("rate and window must be >= 0")
    n = rng.poisson(rate_cps * window_ps * 1e-12)
    return rng.uniform(0.0, window_ps, size=n)


def dead_time_filter(times_ps: np.ndarray, dead_time_ps: float) -> np.ndarray:
    """Non-paralyzable dead-time mask over time-sorted click times.

    A click is kept only if it falls at least dead_time_ps after the last
    KEPT click; the filter therefore never blocks longer than one dead
    time per accepted event, and kept rates stay below 1/dead_time.

    Returns a boolean keep-mask aligned with `times_ps` (must be sorted).

    Any event at or beyond dead_time_ps from its immediate predecessor is
    kept regardless of earlier suppressions (the last kept click is never
    later than the predecessor), so only runs of closer-than-dead-time
    events need the sequential scan. That keeps this O(events) with a
    Python loop over dense runs only.
    """
    times = np.asarray(times_ps, dtype=float)
    n = times.size
    keep = np.ones(n, dtype=bool)
    if dead_time_ps <= 0 or n <= 1:
        return keep
    close = np.diff(times) < dead_time_ps  # close[i]: event i+1 crowds event i
    idx = np.flatnonzero(close)
    if idx.size == 0:
        return keep
    run_breaks = np.flatnonzero(np.diff(idx) > 1)
    run_starts = np.concatenate(([0], run_breaks + 1))
    run_ends = np.concatenate((run_breaks, [idx.size - 1]))
    for rs, re in zip(run_starts, run_ends):
        lo = idx[rs]           # run covers events lo .. idx[re]+1
        hi = idx[re] + 2
        last_kept = times[lo]
        for i in range(lo + 1, hi):
            if times[i] - last_kept >= dead_time_ps:
                last_kept = times[i]
            else:
                keep[i] = False
    return keep


def detect(arrivals, spad: SpadModel, window_ps: float, current_rate_cps: float,
           rng: np.random.Generator) -> list[DetectionEvent]:
    """Turn analyzer-passed photon arrivals into accepted detector clicks.

    Args:
        arrivals: sequence of (true_time_ps, detector) pairs, detector in {0, 1}.
        spad: detector channel model (applied identically to both channels).
        window_ps: observation window [0, window_ps) for dark generation.
        current_rate_cps: per-detector pre-dead-time click rate driving the
            rate-dependent jitter width.
        rng: numpy Generator.

    Returns:
        Time-sorted DetectionEvents that survived efficiency thinning and
        per-detector dead-time filtering; dark events carry origin "dark".
    """
    if window_ps < 0:
        raise ValueError("window_ps must be >= 0")
    arr = list(arrivals)
    if arr:
        true_t = np.array([a[0] for a in arr], dtype=float)
        det = np.array([a[1] for a in arr], dtype=np.int64)
    else:
        true_t = np.empty(0)
        det = np.empty(0, dtype=np.int64)
    if det.size and not np.isin(det, (0, 1)).all():
        raise ValueError("detector ids must be 0 or 1")

    survived = rng.random(true_t.size) < spad.efficiency
    fwhm = effective_fwhm(spad.jitter, current_rate_cps)
    stamps = sample_arrival(true_t[survived], fwhm, spad.sync_fwhm_ps, rng)
    det_s = det[survived]

    events: list[DetectionEvent] = []
    for d in (0, 1):
        sig_t = np.atleast_1d(stamps)[det_s == d]
        dark_t = dark_arrival_times(spad.dark_count_rate_cps, window_ps, rng)
        t = np.concatenate([sig_t, dark_t])
        origin_dark = np.concatenate([np.zeros(sig_t.size, bool), np.ones(dark_t.size, bool)])
        order = np.argsort(t, kind="stable")
        t, origin_dark = t[order], origin_dark[order]
        kept = dead_time_filter(t, spad.dead_time_ps)
        events.extend(
            DetectionEvent(d, float(ts), "dark" if dk else "signal")
            for ts, dk in zip(t[kept], origin_dark[kept])
        )
    events.sort(key=lambda e: e.timestamp_ps)
    return events


def assign_slot(timestamp_ps, clock_ghz: float, phase_ps: float = 0.0):
    """Map timestamps to clock-slot indices.

    slot = round((t - phase) / T) with T = 1000 / clock_ghz ps and ties
    rounded half away from zero. Scalar in, int out; array in, int64 out.
    Indices may be negative or beyond the frame for timestamps jittered
    past the edges; callers decide how to treat out-of-range slots.
    """
    if clock_ghz <= 0:
        raise ValueError("clock_ghz must be > 0")
    period = 1000.0 / clock_ghz
    x = (np.asarray(timestamp_ps, dtype=float) - phase_ps) / period
    slots = np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5)).astype(np.int64)
    return int(slots) if slots.ndim == 0 else slots


def misassignment_probability(fwhm_ps: float, clock_ghz: float) -> float:
    """Probability that Gaussian timing noise lands an event outside its slot.

    P(|N(0, sigma^2)| > T/2) = erfc(T / (2*sqrt(2)*sigma)) with
    T = 1000/clock_ghz and sigma = fwhm / (2*sqrt(2*ln 2)). Monotone:
    increasing in fwhm, increasing in clock frequency; 0 as fwhm -> 0.
    """
    if clock_ghz <= 0:
        raise ValueError("clock_ghz must be > 0")
    if fwhm_ps < 0:
        raise ValueError("fwhm_ps must be >= 0")
    if fwhm_ps == 0.0:
        return 0.0
    period = 1000.0 / clock_ghz
    sigma = fwhm_ps / FWHM_PER_SIGMA
    return float(erfc(period / (2.0 * math.sqrt(2.0) * sigma)))


@dataclass(frozen=True)
class TimingHistogram:
    """Fixed-width binned timing residuals.

    Bin i spans [start_ps + i*bin_width_ps, start_ps + (i+1)*bin_width_ps).
    `counts` sums to the number of binned samples; samples outside the
    covered span are dropped by `from_samples`.
    """

    bin_width_ps: float
    start_ps: float
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.bin_width_ps <= 0:
            raise ValueError("bin_width_ps must be > 0")
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("counts must be a nonempty 1-D array")
        if counts.min() < 0:
            raise ValueError("counts must be >= 0")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_samples(cls, samples_ps, bin_width_ps: float, lo_ps: float, hi_ps: float) -> "TimingHistogram":
        if hi_ps <= lo_ps:
            raise ValueError("hi_ps must exceed lo_ps")
        n_bins = int(math.ceil((hi_ps - lo_ps) / bin_width_ps))
        edges = lo_ps + bin_width_ps * np.arange(n_bins + 1)
        counts, _ = np.histogram(np.asarray(samples_ps, dtype=float), bins=edges)
        return cls(bin_width_ps=bin_width_ps, start_ps=lo_ps, counts=counts)

    def total(self) -> int:
        return int(self.counts.sum())

    def bin_starts(self) -> np.ndarray:
        return self.start_ps + self.bin_width_ps * np.arange(self.counts.size)

    def bin_centers(self) -> np.ndarray:
        return self.bin_starts() + 0.5 * self.bin_width_ps

    def csv_rows(self):
        """Rows of (bin_start_ps, count) for every bin, in order."""
        return list(zip(self.bin_starts().tolist(), self.counts.tolist()))


def histogram_fwhm(hist: TimingHistogram) -> float:
    """Full width at half maximum of a single-peaked histogram.

    The two half-maximum crossings are located by linear interpolation
    between adjacent bin centers. Degenerate single-bin peaks report one
    bin width. Raises FwhmEstimationError when there are fewer than 100
    counts, when the above-half-maximum region is not contiguous
    (ambiguous peak), or when a crossing falls outside the histogram.
    """
    counts = hist.counts.astype(float)
    if counts.sum() < 100:
        raise FwhmEstimationError(f"need >= 100 counts, got {int(counts.sum())}")
    if np.count_nonzero(counts) == 1:
        return hist.bin_width_ps
    peak = counts.max()
    half = peak / 2.0
    above = np.flatnonzero(counts >= half)
    if np.any(np.diff(above) != 1):
        raise FwhmEstimationError("ambiguous peak: disjoint half-maximum regions")
    left, right = above[0], above[-1]
    if left == 0 or right == counts.size - 1:
        raise FwhmEstimationError("half-maximum crossing outside histogram span")
    centers = hist.bin_centers()
    x_left = centers[left - 1] + (half - counts[left - 1]) / (counts[left] - counts[left - 1]) * hist.bin_width_ps
    x_right = centers[right] + (counts[right] - half) / (counts[right] - counts[right + 1]) * hist.bin_width_ps
    return float(x_right - x_left)
