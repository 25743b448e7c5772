"""Run configuration: one flat record of every physical and protocol knob.

A SimConfig is immutable; derive variants with `dataclasses.replace`. The
TOML representation round-trips exactly (`from_toml_str(cfg.to_toml())`
equals `cfg`), which is also how the command line echoes the resolved
configuration of a run.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on older interpreters
    import tomli as tomllib

from .detector import ENHANCED_JITTER, STANDARD_JITTER, JitterProfile, SpadModel
from .optics import FiberChannel

__all__ = ["SimConfig", "DETECTOR_PROFILES"]

DETECTOR_PROFILES = {"standard": STANDARD_JITTER, "enhanced": ENHANCED_JITTER}

_INT_FIELDS = ("n_slots", "cascade_passes", "security_parameter", "seed")


@dataclass(frozen=True)
class SimConfig:
    """Everything a trial needs, with the shipped defaults.

    The three jitter_* override fields replace single numbers of the
    chosen detector profile when set; left at None the profile preset
    applies unchanged.
    """

    clock_ghz: float = 2.0
    distance_km: float = 6.55
    attenuation_db_per_km: float = 2.2
    fixed_loss_db: float = 3.0
    mu: float = 0.1
    efficiency: float = 0.45
    dark_count_rate_cps: float = 500.0
    dead_time_ps: float = 50_000.0
    extinction_ratio_db: float = 25.0
    detector_profile: str = "enhanced"
    jitter_base_fwhm_ps: float | None = None
    jitter_knee_cps: float | None = None
    jitter_slope_ps_per_mcps: float | None = None
    sync_fwhm_ps: float = 100.0
    eve_fraction: float = 0.0
    n_slots: int = 1_000_000
    sample_fraction: float = 0.1
    cascade_passes: int = 4
    security_parameter: int = 30
    seed: int = 42

    def __post_init__(self):
        def positive(name):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

        def nonnegative(name):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

        for name in ("clock_ghz", "attenuation_db_per_km", "mu", "n_slots"):
            positive(name)
        for name in ("distance_km", "fixed_loss_db", "dark_count_rate_cps",
                     "dead_time_ps", "extinction_ratio_db", "sync_fwhm_ps",
                     "security_parameter", "seed"):
            nonnegative(name)
        if self.clock_ghz > 10.0:
            raise ValueError("clock_ghz must be <= 10")
        if not (0.0 < self.efficiency <= 1.0):
            raise ValueError("efficiency must be in (0, 1]")
        if not (0.0 <= self.eve_fraction <= 1.0):
            raise ValueError("eve_fraction must be in [0, 1]")
        if not (0.0 < self.sample_fraction < 1.0):
            raise ValueError("sample_fraction must be in (0, 1)")
        if self.cascade_passes < 1:
            raise ValueError("cascade_passes must be >= 1")
        if self.detector_profile not in DETECTOR_PROFILES:
            raise ValueError(
                f"detector_profile must be one of {sorted(DETECTOR_PROFILES)}, "
                f"got {self.detector_profile!r}"
            )
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")

    # -- derived component models -------------------------------------

    def jitter(self) -> JitterProfile:
        base = DETECTOR_PROFILES[self.detector_profile]
        return JitterProfile(
            name=base.name,
            base_fwhm_ps=self.jitter_base_fwhm_ps if self.jitter_base_fwhm_ps is not None else base.base_fwhm_ps,
            knee_cps=self.jitter_knee_cps if self.jitter_knee_cps is not None else base.knee_cps,
            slope_ps_per_mcps=self.jitter_slope_ps_per_mcps if self.jitter_slope_ps_per_mcps is not None else base.slope_ps_per_mcps,
        )

    def spad(self) -> SpadModel:
        return SpadModel(
            efficiency=self.efficiency,
            dark_count_rate_cps=self.dark_count_rate_cps,
            dead_time_ps=self.dead_time_ps,
            jitter=self.jitter(),
            sync_fwhm_ps=self.sync_fwhm_ps,
        )

    def channel(self) -> FiberChannel:
        return FiberChannel(
            length_km=self.distance_km,
            attenuation_db_per_km=self.attenuation_db_per_km,
            fixed_insertion_loss_db=self.fixed_loss_db,
        )

    def slot_period_ps(self) -> float:
        return 1000.0 / self.clock_ghz

    # -- TOML round trip ----------------------------------------------

    def to_toml(self) -> str:
        """Flat TOML document; None-valued overrides are omitted."""
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, str):
                lines.append(f'{f.name} = "{v}"')
            elif isinstance(v, int):
                lines.append(f"{f.name} = {v}")
            else:
                lines.append(f"{f.name} = {float(v)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, data: dict) -> "SimConfig":
        """Build from a parsed mapping, rejecting unknown keys."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
        kwargs = {}
        for name, value in data.items():
            if name in _INT_FIELDS:
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError(f"{name} must be an integer")
                kwargs[name] = int(value)
            elif name == "detector_profile":
                kwargs[name] = str(value)
            else:
                kwargs[name] = float(value)
        return cls(**kwargs)

    @classmethod
    def from_toml_str(cls, text: str) -> "SimConfig":
        return cls.from_mapping(tomllib.loads(text))

    @classmethod
    def from_toml_file(cls, path) -> "SimConfig":
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh))
