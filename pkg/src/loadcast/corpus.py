"""Synthetic pretraining corpus: families of trend/seasonal/noisy/spiked series.

The real multi-domain pretraining data behind large forecasting models is not
available, so this module fabricates a desk-scale stand-in that spans the
same axes of variation: seasonality at several periods, trends, noise levels,
outliers, and random walks. Everything is a pure function of its seeds.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import ConfigError
from .series import TimeSeries, write_csv

FAMILIES = ("trend", "seasonal", "trend_seasonal", "noisy", "outlier_spiked", "random_walk")
PERIODS = (12, 24, 168)
MIN_LENGTH = 64
MAX_OUTLIER_RATE = 0.05
CORPUS_EPOCH = datetime(2020, 1, 1)

DEFAULT_SERIES_COUNT = 200
DEFAULT_SERIES_LENGTH = 512


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for one synthetic series."""

    family: str
    length: int
    period: int | None = None
    trend_slope: float = 0.0
    noise_std: float = 0.0
    outlier_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.length < MIN_LENGTH:
            raise ConfigError(f"length must be >= {MIN_LENGTH}, got {self.length}")
        if not 0.0 <= self.outlier_rate <= MAX_OUTLIER_RATE:
            raise ConfigError(
                f"outlier_rate must be in [0, {MAX_OUTLIER_RATE}], got {self.outlier_rate}"
            )
        if self.noise_std < 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.family in ("seasonal", "trend_seasonal", "outlier_spiked") and (
            self.period is None or self.period < 2
        ):
            raise ConfigError(f"family {self.family!r} needs a period >= 2")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "length": self.length,
            "period": self.period,
            "trend_slope": self.trend_slope,
            "noise_std": self.noise_std,
            "outlier_rate": self.outlier_rate,
            "seed": self.seed,
        }


def generate_series(spec: GeneratorSpec) -> TimeSeries:
    """Deterministically realize one series from its spec.

    The random draws are ordered so that two specs differing only in
    outlier_rate share the identical base series; spikes then multiply a
    subset of positions by a factor in [2, 4].
    """
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.length, dtype=np.float64)
    base_level = rng.uniform(1.5, 3.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    amplitude = rng.uniform(0.3, 1.0)

    if spec.family == "trend":
        values = base_level + spec.trend_slope * t
    elif spec.family == "seasonal":
        values = base_level + amplitude * np.sin(2.0 * np.pi * t / spec.period + phase)
    elif spec.family == "trend_seasonal":
        values = (
            base_level
            + spec.trend_slope * t
            + amplitude * np.sin(2.0 * np.pi * t / spec.period + phase)
        )
    elif spec.family == "noisy":
        values = np.full(spec.length, base_level)
    elif spec.family == "outlier_spiked":
        values = base_level + amplitude * np.sin(2.0 * np.pi * t / spec.period + phase)
    elif spec.family == "random_walk":
        steps = rng.normal(0.0, max(spec.noise_std, 0.02), size=spec.length)
        values = base_level + np.cumsum(steps)
    else:  # unreachable, __post_init__ validates
        raise ConfigError(f"unknown family {spec.family!r}")

    if spec.family != "random_walk" and spec.noise_std > 0:
        values = values + rng.normal(0.0, spec.noise_std, size=spec.length)

    # Drawn unconditionally so the rate-0 twin consumes the same stream.
    spike_positions = rng.uniform(size=spec.length) < spec.outlier_rate
    spike_factors = rng.uniform(2.0, 4.0, size=spec.length)
    if spec.family == "outlier_spiked":
        values = np.where(spike_positions, values * spike_factors, values)

    return TimeSeries(CORPUS_EPOCH, 1.0, values, name=f"{spec.family}_{spec.seed}")


def draw_specs(
    spec_count: int,
    master_seed: int,
    series_length: int = DEFAULT_SERIES_LENGTH,
    exclude_families: tuple[str, ...] = (),
) -> list[GeneratorSpec]:
    """Stratified draw of generator recipes cycling over the kept families."""
    if spec_count < 1:
        raise ConfigError(f"spec_count must be >= 1, got {spec_count}")
    for family in exclude_families:
        if family not in FAMILIES:
            raise ConfigError(f"cannot exclude unknown family {family!r}")
    kept = tuple(f for f in FAMILIES if f not in exclude_families)
    if not kept:
        raise ConfigError("all families excluded")
    rng = np.random.default_rng(master_seed)
    specs = []
    for i in range(spec_count):
        family = kept[i % len(kept)]
        period = int(rng.choice(PERIODS))
        slope = float(rng.uniform(-0.004, 0.004))
        noise = float(rng.uniform(0.0, 0.08))
        rate = float(rng.uniform(0.01, MAX_OUTLIER_RATE))
        seed = int(rng.integers(0, 2**31 - 1))
        specs.append(
            GeneratorSpec(
                family=family,
                length=series_length,
                period=period,
                trend_slope=slope,
                noise_std=noise if family != "noisy" else noise + 0.1,
                outlier_rate=rate if family == "outlier_spiked" else 0.0,
                seed=seed,
            )
        )
    return specs


def build_corpus(
    spec_count: int = DEFAULT_SERIES_COUNT,
    master_seed: int = 0,
    series_length: int = DEFAULT_SERIES_LENGTH,
    exclude_families: tuple[str, ...] = (),
) -> list[TimeSeries]:
    """Generate the full corpus; a pure function of its arguments."""
    return [
        generate_series(spec)
        for spec in draw_specs(spec_count, master_seed, series_length, exclude_families)
    ]


def export_corpus(
    out_dir: str,
    spec_count: int = DEFAULT_SERIES_COUNT,
    master_seed: int = 0,
    series_length: int = DEFAULT_SERIES_LENGTH,
    exclude_families: tuple[str, ...] = (),
) -> str:
    """Write one CSV per series plus a manifest of specs; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    specs = draw_specs(spec_count, master_seed, series_length, exclude_families)
    entries = []
    for i, spec in enumerate(specs):
        series = generate_series(spec)
        filename = f"series_{i:04d}.csv"
        write_csv(series, os.path.join(out_dir, filename))
        entries.append({"file": filename, "spec": spec.to_dict()})
    manifest = {
        "spec_count": spec_count,
        "master_seed": master_seed,
        "series_length": series_length,
        "exclude_families": list(exclude_families),
        "series": entries,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
