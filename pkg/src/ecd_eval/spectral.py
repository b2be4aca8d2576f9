"""Weighted power-law diagnostics over weight-matrix spectra.

For each layer matrix W (oriented N x M with N >= M), the empirical
spectral distribution is the eigenvalue set of W^T W / N, i.e. the squared
singular values of W scaled by 1/N.  A continuous power law is fitted to
the tail by maximum likelihood,

    alpha = 1 + n / sum(ln(lambda_i / xmin)),

with xmin chosen to minimize the Kolmogorov-Smirnov distance between the
tail and the fitted law.  Layer fits combine into one number,

    weighted_alpha = mean over layers of alpha_l * ln(lambda_max_l),

and two checkpoints compare by the relative change of that number.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ecd_eval.jsonio import InputError


@dataclass(frozen=True, eq=False)
class LayerMatrix:
    """One layer's weights, oriented so rows >= columns."""

    layer_id: str
    matrix: np.ndarray

    @classmethod
    def from_array(cls, layer_id: str, array: np.ndarray) -> "LayerMatrix":
        arr = np.asarray(array, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"layer {layer_id!r}: matrix must be 2-dimensional")
        if min(arr.shape) < 2:
            raise ValueError(f"layer {layer_id!r}: both dimensions must be >= 2")
        if not np.isfinite(arr).all():
            raise ValueError(f"layer {layer_id!r}: matrix has non-finite entries")
        if arr.shape[0] < arr.shape[1]:
            arr = arr.T
        return cls(layer_id=layer_id, matrix=arr)


@dataclass(frozen=True, eq=False)
class LayerSpectrum:
    """Descending eigenvalues of W^T W / N for one layer."""

    layer_id: str
    eigenvalues: np.ndarray

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])


def esd(layer: LayerMatrix) -> LayerSpectrum:
    """Empirical spectral distribution via singular values of W."""
    n = layer.matrix.shape[0]
    singulars = np.linalg.svd(layer.matrix, compute_uv=False)
    eigenvalues = np.sort(singulars**2 / n)[::-1]
    return LayerSpectrum(layer_id=layer.layer_id, eigenvalues=eigenvalues)


def mle_alpha(tail: np.ndarray, xmin: float) -> float:
    """Continuous maximum-likelihood exponent for a tail at a given xmin."""
    tail = np.asarray(tail, dtype=float)
    if tail.size == 0:
        raise ValueError("empty tail")
    if xmin <= 0:
        raise ValueError("xmin must be positive")
    if (tail < xmin).any():
        raise ValueError("tail values must be >= xmin")
    log_sum = float(np.log(tail / xmin).sum())
    if log_sum <= 0:
        raise ValueError("degenerate tail: all values equal xmin")
    return 1.0 + tail.size / log_sum


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    xmin: float
    n_tail: int
    ks_statistic: float


def _ks_distance(tail: np.ndarray, xmin: float, alpha: float) -> float:
    # tail ascending; compare fitted CDF to the empirical step function.
    n = tail.size
    fitted = 1.0 - (tail / xmin) ** (1.0 - alpha)
    steps_hi = np.arange(1, n + 1) / n
    steps_lo = np.arange(0, n) / n
    return float(
        max(np.abs(fitted - steps_hi).max(), np.abs(fitted - steps_lo).max())
    )


def fit_power_law(
    spectrum: LayerSpectrum,
    xmin: float | None = None,
    min_tail: int = 5,
) -> PowerLawFit:
    """Fit the spectral tail; xmin is searched by KS distance unless given."""
    positive = np.sort(spectrum.eigenvalues[spectrum.eigenvalues > 0])
    if positive.size < min_tail:
        raise ValueError(
            f"layer {spectrum.layer_id!r}: fewer than {min_tail} positive eigenvalues"
        )

    if xmin is not None:
        if xmin <= 0:
            raise ValueError("xmin must be positive")
        tail = positive[positive >= xmin]
        if tail.size < min_tail:
            raise ValueError(
                f"layer {spectrum.layer_id!r}: tail at xmin={xmin} has fewer than "
                f"{min_tail} points"
            )
        alpha = mle_alpha(tail, xmin)
        return PowerLawFit(
            alpha=alpha,
            xmin=float(xmin),
            n_tail=int(tail.size),
            ks_statistic=_ks_distance(tail, xmin, alpha),
        )

    best: PowerLawFit | None = None
    for candidate in np.unique(positive):
        tail = positive[positive >= candidate]
        if tail.size < min_tail:
            break
        log_sum = float(np.log(tail / candidate).sum())
        if log_sum <= 0:
            continue
        alpha = 1.0 + tail.size / log_sum
        ks = _ks_distance(tail, float(candidate), alpha)
        if best is None or ks < best.ks_statistic:
            best = PowerLawFit(
                alpha=alpha,
                xmin=float(candidate),
                n_tail=int(tail.size),
                ks_statistic=ks,
            )
    if best is None:
        raise ValueError(
            f"layer {spectrum.layer_id!r}: no viable tail (eigenvalues too repetitive)"
        )
    return best


@dataclass(frozen=True)
class LayerFit:
    layer_id: str
    alpha: float
    lambda_max: float
    xmin: float
    n_tail: int


@dataclass(frozen=True)
class SpectralStats:
    """Per-layer fits and their weighted-alpha aggregate."""

    per_layer: tuple[LayerFit, ...]
    weighted_alpha: float
    skipped: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def to_dict(self) -> dict[str, object]:
        return {
            "weighted_alpha": self.weighted_alpha,
            "per_layer": [
                {
                    "layer_id": f.layer_id,
                    "alpha": f.alpha,
                    "lambda_max": f.lambda_max,
                    "xmin": f.xmin,
                    "n_tail": f.n_tail,
                }
                for f in self.per_layer
            ],
            "skipped": [
                {"layer_id": layer_id, "reason": reason}
                for layer_id, reason in self.skipped
            ],
        }


def combine_layer_fits(per_layer: Sequence[LayerFit]) -> float:
    """(1/L) * sum of alpha_l * ln(lambda_max_l)."""
    if not per_layer:
        raise ValueError("no layer fits to combine")
    return float(
        np.mean([f.alpha * np.log(f.lambda_max) for f in per_layer])
    )


def weighted_alpha(
    layers: Iterable[LayerMatrix], min_tail: int = 5, xmin: float | None = None
) -> SpectralStats:
    """Fit every layer, skipping unfittable ones, and aggregate."""
    fits: list[LayerFit] = []
    skipped: list[tuple[str, str]] = []
    for layer in layers:
        spectrum = esd(layer)
        try:
            fit = fit_power_law(spectrum, xmin=xmin, min_tail=min_tail)
        except ValueError as exc:
            skipped.append((layer.layer_id, str(exc)))
            continue
        fits.append(
            LayerFit(
                layer_id=layer.layer_id,
                alpha=fit.alpha,
                lambda_max=spectrum.lambda_max,
                xmin=fit.xmin,
                n_tail=fit.n_tail,
            )
        )
    if not fits:
        raise ValueError("no fittable layers")
    return SpectralStats(
        per_layer=tuple(fits),
        weighted_alpha=combine_layer_fits(fits),
        skipped=tuple(skipped),
    )


@dataclass(frozen=True)
class DriftReport:
    """Change in weighted alpha between two checkpoints."""

    per_layer_delta_alpha: tuple[tuple[str, float], ...]
    weighted_alpha_before: float
    weighted_alpha_after: float
    delta_weighted_alpha: float
    relative_drift: float
    threshold: float
    passed: bool

    def to_dict(self) -> dict[str, object]:
        return {
            "per_layer_delta_alpha": [
                {"layer_id": layer_id, "delta_alpha": delta}
                for layer_id, delta in self.per_layer_delta_alpha
            ],
            "weighted_alpha_before": self.weighted_alpha_before,
            "weighted_alpha_after": self.weighted_alpha_after,
            "delta_weighted_alpha": self.delta_weighted_alpha,
            "relative_drift": self.relative_drift,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def compare_stats(
    before: SpectralStats, after: SpectralStats, threshold: float = 0.1
) -> DriftReport:
    """Relative drift of weighted alpha; passes when within the threshold."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    before_ids = {f.layer_id for f in before.per_layer}
    after_ids = {f.layer_id for f in after.per_layer}
    if before_ids != after_ids:
        raise ValueError(
            f"layer sets differ: only-before {sorted(before_ids - after_ids)}, "
            f"only-after {sorted(after_ids - before_ids)}"
        )
    after_by_id = {f.layer_id: f for f in after.per_layer}
    deltas = tuple(
        (f.layer_id, after_by_id[f.layer_id].alpha - f.alpha) for f in before.per_layer
    )
    delta = after.weighted_alpha - before.weighted_alpha
    if before.weighted_alpha == 0.0:
        relative = 0.0 if delta == 0.0 else float("inf")
    else:
        relative = abs(delta) / abs(before.weighted_alpha)
    return DriftReport(
        per_layer_delta_alpha=deltas,
        weighted_alpha_before=before.weighted_alpha,
        weighted_alpha_after=after.weighted_alpha,
        delta_weighted_alpha=delta,
        relative_drift=relative,
        threshold=threshold,
        passed=relative <= threshold,
    )


_DTYPES = {"f32": np.float32, "f64": np.float64}


def load_layer_manifest(path: str | Path) -> list[LayerMatrix]:
    """Load layers listed in a manifest JSON; paths resolve beside it.

    Each entry names a matrix file (.csv for text, anything else is raw
    row-major binary of the declared dtype) with its expected shape.
    """
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or "layers" not in manifest:
        raise InputError(f"{path}: manifest needs a 'layers' list")

    layers: list[LayerMatrix] = []
    for entry in manifest["layers"]:
        missing = {"id", "path", "rows", "cols", "dtype"} - entry.keys()
        if missing:
            raise InputError(f"{path}: layer entry lacks {sorted(missing)}")
        layer_id = str(entry["id"])
        dtype = _DTYPES.get(entry["dtype"])
        if dtype is None:
            raise InputError(f"{path}: layer {layer_id!r} has unknown dtype "
                             f"{entry['dtype']!r} (expected f32 or f64)")
        rows, cols = int(entry["rows"]), int(entry["cols"])
        matrix_path = path.parent / str(entry["path"])
        try:
            if matrix_path.suffix == ".csv":
                arr = np.loadtxt(matrix_path, delimiter=",", dtype=dtype, ndmin=2)
            else:
                arr = np.fromfile(matrix_path, dtype=dtype).reshape(rows, cols)
        except OSError as exc:
            raise InputError(f"cannot read {matrix_path}: {exc}") from exc
        except ValueError as exc:
            raise InputError(f"{matrix_path}: {exc}") from exc
        if arr.shape != (rows, cols):
            raise InputError(
                f"{matrix_path}: shape {arr.shape} != declared ({rows}, {cols})"
            )
        layers.append(LayerMatrix.from_array(layer_id, arr))
    if not layers:
        raise InputError(f"{path}: manifest lists no layers")
    return layers
