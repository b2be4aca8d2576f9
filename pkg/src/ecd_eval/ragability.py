"""RAG-ability density profiles over batches of scored pairs.

Each scored pair contributes two shifted samples: a green one,
mean_common + ME (what retrieval failed to carry over), and a blue one,
-(mean_common + AE) (what generation invented, negated so the two
families sit on opposite sides of zero).  Kernel density estimates of
the two samples make divergence regimes visible; the peak locations
summarize where each family concentrates.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ecd_eval.metric import EcdBreakdown, EcdConfig, ecd_score
from ecd_eval.text import AnnotatedDoc


class DegenerateSampleError(ValueError):
    """Raised when a sample cannot support a density estimate."""


@dataclass(frozen=True)
class ScoredPair:
    context: AnnotatedDoc
    generated: AnnotatedDoc
    breakdown: EcdBreakdown


@dataclass(frozen=True)
class ScenarioRun:
    """All scored pairs of one scenario under one configuration."""

    scenario: str
    pairs: tuple[ScoredPair, ...]
    config: EcdConfig


def score_pairs(
    doc_pairs: Sequence[tuple[AnnotatedDoc, AnnotatedDoc]],
    config: EcdConfig = EcdConfig(),
    jobs: int = 1,
) -> list[EcdBreakdown]:
    """Score pairs, optionally across threads; output order follows input."""
    if jobs <= 1:
        return [ecd_score(c, g, config) for c, g in doc_pairs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda p: ecd_score(p[0], p[1], config), doc_pairs))


def score_run(
    scenario: str,
    doc_pairs: Sequence[tuple[AnnotatedDoc, AnnotatedDoc]],
    config: EcdConfig = EcdConfig(),
    jobs: int = 1,
) -> ScenarioRun:
    breakdowns = score_pairs(doc_pairs, config, jobs)
    pairs = tuple(
        ScoredPair(context=c, generated=g, breakdown=b)
        for (c, g), b in zip(doc_pairs, breakdowns)
    )
    return ScenarioRun(scenario=scenario, pairs=pairs, config=config)


def shift_values(run: ScenarioRun) -> tuple[list[float], list[float]]:
    """Green and blue shifted samples, one of each per scored pair."""
    if not run.pairs:
        raise ValueError("run has no scored pairs")
    green = [p.breakdown.mean_common + p.breakdown.me_penalty for p in run.pairs]
    blue = [-(p.breakdown.mean_common + p.breakdown.ae_penalty) for p in run.pairs]
    return green, blue


def silverman_bandwidth(samples: Sequence[float]) -> float:
    """0.9 * min(std, IQR/1.34) * n^(-1/5), with std alone when IQR collapses."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise DegenerateSampleError("bandwidth needs at least two samples")
    std = float(x.std())
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = float(q75 - q25)
    # Heavy ties can zero the IQR while the spread is real; fall back to std.
    a = min(std, iqr / 1.34) if iqr > 0 else std
    return 0.9 * a * x.size ** (-0.2)


def _gaussian_density(grid: np.ndarray, samples: np.ndarray, h: float) -> np.ndarray:
    z = (grid[:, None] - samples[None, :]) / h
    kernels = np.exp(-0.5 * z * z)
    return kernels.sum(axis=1) / (samples.size * h * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True, eq=False)
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    peak: float


def kde(
    samples: Sequence[float],
    grid_size: int = 512,
    bandwidth: float | None = None,
) -> DensityCurve:
    """Gaussian KDE on a uniform grid spanning the samples plus 3 bandwidths."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DegenerateSampleError("empty sample")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if bandwidth is None:
        h = silverman_bandwidth(x)
        if h <= 0:
            raise DegenerateSampleError("all samples identical; no automatic bandwidth")
    else:
        h = float(bandwidth)
        if h <= 0:
            raise ValueError("bandwidth must be positive")
    grid = np.linspace(x.min() - 3.0 * h, x.max() + 3.0 * h, grid_size)
    density = _gaussian_density(grid, x, h)
    return DensityCurve(
        grid=grid, density=density, bandwidth=h, peak=float(grid[int(density.argmax())])
    )


@dataclass(frozen=True, eq=False)
class DensityProfile:
    """Green and blue densities of one run on a shared grid."""

    grid: np.ndarray
    green_density: np.ndarray
    blue_density: np.ndarray
    green_peak: float
    blue_peak: float
    bandwidth: float


def profile(
    run: ScenarioRun,
    grid_size: int = 512,
    bandwidth: float | None = None,
) -> DensityProfile:
    """Estimate both shifted densities on one grid spanning the pooled samples."""
    green, blue = shift_values(run)
    pooled = np.asarray(green + blue, dtype=float)
    if bandwidth is None:
        h = silverman_bandwidth(pooled)
        if h <= 0:
            raise DegenerateSampleError("all samples identical; no automatic bandwidth")
    else:
        h = float(bandwidth)
        if h <= 0:
            raise ValueError("bandwidth must be positive")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    grid = np.linspace(pooled.min() - 3.0 * h, pooled.max() + 3.0 * h, grid_size)
    green_density = _gaussian_density(grid, np.asarray(green, dtype=float), h)
    blue_density = _gaussian_density(grid, np.asarray(blue, dtype=float), h)
    return DensityProfile(
        grid=grid,
        green_density=green_density,
        blue_density=blue_density,
        green_peak=float(grid[int(green_density.argmax())]),
        blue_peak=float(grid[int(blue_density.argmax())]),
        bandwidth=h,
    )


@dataclass(frozen=True)
class OrderingReport:
    """ECD totals of one generation against reordered context variants."""

    totals: tuple[float, ...]
    dispersion: float
    value_range: float


def ordering_robustness(
    context_variants: Sequence[AnnotatedDoc],
    generated: Sequence[AnnotatedDoc],
    config: EcdConfig = EcdConfig(),
) -> OrderingReport:
    """Score each (variant, generation) pair and summarize the spread.

    The two sequences pair up elementwise, so callers can hold the
    generation fixed by repeating it.  Dispersion is the population
    standard deviation of the totals.
    """
    if len(context_variants) != len(generated):
        raise ValueError("context_variants and generated must have equal length")
    if not context_variants:
        raise ValueError("no variants to compare")
    totals = tuple(
        ecd_score(c, g, config).total for c, g in zip(context_variants, generated)
    )
    arr = np.asarray(totals, dtype=float)
    return OrderingReport(
        totals=totals,
        dispersion=float(arr.std()),
        value_range=float(arr.max() - arr.min()),
    )
