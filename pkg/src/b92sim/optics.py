"""Optical front end of the polarization-encoded link.

Covers the transmitter-side photon statistics and everything the fiber and
Bob's polarization analyzers do to a photon before it hits a detector:

* weak coherent pulses carry Poisson-distributed photon numbers,
* the fiber plus fixed insertion losses act as an independent per-photon
  survival trial (binomial thinning),
* a linear polarizer passes a photon according to Malus's law, softened by
  the finite extinction ratio of real optics.

Angles are degrees throughout; linear polarization is periodic mod 180.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Polarization",
    "WeakPulse",
    "FiberChannel",
    "transmittance",
    "sample_photon_number",
    "attenuate",
    "malus_pass_probability",
]


@dataclass(frozen=True)
class Polarization:
    """Linear polarization state, normalized to [0, 180) degrees."""

    angle_deg: float

    def __post_init__(self):
        if not math.isfinite(self.angle_deg):
            raise ValueError(f"polarization angle must be finite, got {self.angle_deg}")
        object.__setattr__(self, "angle_deg", float(self.angle_deg) % 180.0)

    def offset_deg(self, other: "Polarization | float") -> float:
        """Smallest angular separation from `other`, in [0, 90]."""
        o = other.angle_deg if isinstance(other, Polarization) else float(other)
        d = abs(self.angle_deg - o) % 180.0
        return min(d, 180.0 - d)


@dataclass(frozen=True)
class WeakPulse:
    """One clock slot's attenuated laser pulse.

    `mean_photon_number` is the Poisson mean at the transmitter output; the
    realized photon number is drawn downstream by `sample_photon_number`.
    Emission time is the slot center: slot_index * 1000 / clock_ghz ps.
    """

    slot_index: int
    mean_photon_number: float
    polarization: Polarization
    emission_time_ps: float

    def __post_init__(self):
        if self.slot_index < 0:
            raise ValueError("slot_index must be >= 0")
        if not (self.mean_photon_number > 0 and math.isfinite(self.mean_photon_number)):
            raise ValueError("mean_photon_number must be positive and finite")


@dataclass(frozen=True)
class FiberChannel:
    """Transmission fiber plus distance-independent insertion losses."""

    length_km: float
    attenuation_db_per_km: float
    fixed_insertion_loss_db: float = 0.0

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError("length_km must be >= 0")
        if self.attenuation_db_per_km <= 0:
            raise ValueError("attenuation_db_per_km must be > 0")
        if self.fixed_insertion_loss_db < 0:
            raise ValueError("fixed_insertion_loss_db must be >= 0")


def transmittance(channel: FiberChannel) -> float:
    """Power transmittance of the channel.

    10^(-(attenuation * length + fixed_loss) / 10); in (0, 1], equal to 1
    only for a lossless zero-length channel. Multiplicative in cascaded
    fiber sections because the dB budget is additive.
    """
    total_db = channel.attenuation_db_per_km * channel.length_km + channel.fixed_insertion_loss_db
    return 10.0 ** (-total_db / 10.0)


def sample_photon_number(mu: float, rng: np.random.Generator, size=None):
    """Draw realized photon numbers for pulses of Poisson mean `mu`.

    Args:
        mu: mean photon number per pulse, > 0.
        rng: numpy Generator.
        size: None for a single int, otherwise an array shape.

    Returns:
        int for size=None, else int64 ndarray.
    """
    if not (mu > 0 and math.isfinite(mu)):
        raise ValueError(f"mu must be positive and finite, got {mu}")
    out = rng.poisson(mu, size=size)
    return int(out) if size is None else out


def attenuate(photon_counts, survival_probability: float, rng: np.random.Generator):
    """Thin photon counts through a lossy element.

    Each photon independently survives with `survival_probability`, so a
    count n maps to Binomial(n, p). Thinning a Poisson(mu) pulse this way
    yields Poisson(mu * p), which is what lets loss stages be collapsed
    into a single survival probability.

    Accepts a scalar count or an array of counts; returns the same shape.
    """
    p = float(survival_probability)
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"survival_probability must be in [0, 1], got {p}")
    counts = np.asarray(photon_counts)
    if counts.size and counts.min() < 0:
        raise ValueError("photon counts must be >= 0")
    out = rng.binomial(counts, p)
    return int(out) if np.isscalar(photon_counts) or counts.ndim == 0 else out


def malus_pass_probability(polarization, analyzer_angle_deg, extinction_ratio_db: float):
    """Probability that a photon passes a linear analyzer.

    Malus's law with a leakage floor: (1 - eps) * cos^2(delta) + eps * sin^2(delta),
    where eps = 10^(-ER_dB / 10). An infinite extinction ratio gives the
    ideal cos^2 law; the blocked-axis leakage rises as ER drops. The
    pass probabilities of two orthogonal analyzers sum to 1 exactly.

    Args:
        polarization: Polarization, or angle(s) in degrees (scalar/array).
        analyzer_angle_deg: analyzer orientation(s) in degrees.
        extinction_ratio_db: >= 0; may be math.inf for ideal optics.

    Returns:
        float for scalar inputs, ndarray otherwise.
    """
    if extinction_ratio_db < 0:
        raise ValueError("extinction_ratio_db must be >= 0")
    eps = 0.0 if math.isinf(extinction_ratio_db) else 10.0 ** (-extinction_ratio_db / 10.0)
    state = polarization.angle_deg if isinstance(polarization, Polarization) else polarization
    delta = np.deg2rad(np.asarray(state, dtype=float) - np.asarray(analyzer_angle_deg, dtype=float))
    c2 = np.cos(delta) ** 2
    p = (1.0 - eps) * c2 + eps * (1.0 - c2)
    return float(p) if p.ndim == 0 else p
