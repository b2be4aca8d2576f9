"""Entity-context divergence (ECD) between a context and a generation.

The score has three parts.  Entities shared by both documents contribute
the mean Jaccard divergence of their context windows.  Entities present
only in the context (missing) and only in the generation (added) each
contribute rank-weighted penalties scaled by the dispersion of the shared
entities' divergences:

    ME = sum(rank(e) for missing e) * sigma / n_common
    AE = sum(rank(e) for added e)   * sigma / n_common
    ECD = mean_common + ME + AE

Higher is worse: 0 means every shared entity appears in identical
neighborhoods and nothing was dropped or invented.
"""
from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Mapping

from ecd_eval.text import AnnotatedDoc, EntitySet, context_window


class NoCommonEntitiesError(ValueError):
    """Raised when two documents share no entities and no fallback applies."""


@dataclass(frozen=True)
class EcdConfig:
    """Knobs for one scoring run.

    sigma_mode "computed" takes the population standard deviation of the
    current pair's per-entity divergences; "fixed" uses sigma_value as
    given.  zero_common_policy decides what happens when the documents
    share no entities: "error" raises, "sentinel" scores the common term
    as 1.0 and divides penalties by 1.
    """

    window_half_size: int = 10
    sigma_mode: str = "computed"
    sigma_value: float | None = None
    zero_common_policy: str = "error"

    def __post_init__(self) -> None:
        if self.window_half_size < 1:
            raise ValueError("window_half_size must be >= 1")
        if self.sigma_mode not in ("computed", "fixed"):
            raise ValueError(f"unknown sigma_mode {self.sigma_mode!r}")
        if self.sigma_mode == "fixed":
            if self.sigma_value is None or self.sigma_value < 0:
                raise ValueError("fixed sigma_mode needs sigma_value >= 0")
        elif self.sigma_value is not None:
            raise ValueError("sigma_value is only meaningful with sigma_mode='fixed'")
        if self.zero_common_policy not in ("error", "sentinel"):
            raise ValueError(f"unknown zero_common_policy {self.zero_common_policy!r}")


@dataclass(frozen=True)
class EntityPartition:
    """Common, missing, and added entity keys for a context/generation pair."""

    common: frozenset[str]
    missing: frozenset[str]
    added: frozenset[str]


def partition_entities(context: EntitySet, generated: EntitySet) -> EntityPartition:
    """Split entity keys into shared, context-only, and generation-only."""
    ctx, gen = context.keys(), generated.keys()
    return EntityPartition(
        common=ctx & gen, missing=frozenset(ctx - gen), added=frozenset(gen - ctx)
    )


def jaccard_divergence(a: frozenset[str], b: frozenset[str]) -> float:
    """1 - |a & b| / |a | b|; two empty sets diverge by 0."""
    union = a | b
    if not union:
        return 0.0
    return 1.0 - len(a & b) / len(union)


def common_divergence(
    context: AnnotatedDoc,
    generated: AnnotatedDoc,
    partition: EntityPartition,
    config: EcdConfig,
) -> tuple[float, dict[str, float], float]:
    """Mean and per-entity window divergence over shared entities, plus sigma.

    Returns (mean, per-entity mapping, sigma).  With no shared entities the
    "sentinel" policy yields (1.0, {}, sigma) where computed sigma is 0;
    the "error" policy raises NoCommonEntitiesError.
    """
    w = config.window_half_size
    per_entity: dict[str, float] = {}
    for key in sorted(partition.common):
        wr = context.window(key, w).words
        wg = generated.window(key, w).words
        per_entity[key] = jaccard_divergence(wr, wg)

    if not per_entity:
        if config.zero_common_policy == "error":
            raise NoCommonEntitiesError(
                f"{context.doc.id} and {generated.doc.id} share no entities"
            )
        sigma = config.sigma_value if config.sigma_mode == "fixed" else 0.0
        return 1.0, per_entity, float(sigma)

    values = list(per_entity.values())
    mean = statistics.fmean(values)
    if config.sigma_mode == "fixed":
        sigma = float(config.sigma_value)  # type: ignore[arg-type]
    else:
        sigma = statistics.pstdev(values)
    return mean, per_entity, sigma


def missing_penalty(
    partition: EntityPartition, context_entities: EntitySet, sigma: float, n_common: int
) -> float:
    """Rank-weighted penalty for entities the generation dropped."""
    if n_common < 1:
        raise ValueError("penalty divisor must be >= 1")
    unknown = partition.missing - context_entities.keys()
    if unknown:
        raise ValueError(f"missing entities absent from context set: {sorted(unknown)}")
    total_rank = sum(context_entities.rank_of(k) for k in partition.missing)
    return total_rank * sigma / n_common


def added_penalty(
    partition: EntityPartition, generated_entities: EntitySet, sigma: float, n_common: int
) -> float:
    """Rank-weighted penalty for entities the generation invented."""
    if n_common < 1:
        raise ValueError("penalty divisor must be >= 1")
    unknown = partition.added - generated_entities.keys()
    if unknown:
        raise ValueError(f"added entities absent from generated set: {sorted(unknown)}")
    total_rank = sum(generated_entities.rank_of(k) for k in partition.added)
    return total_rank * sigma / n_common


@dataclass(frozen=True)
class EcdBreakdown:
    """Full decomposition of one ECD score."""

    per_entity_divergence: Mapping[str, float]
    mean_common: float
    sigma: float
    n_common: int
    me_penalty: float
    ae_penalty: float
    total: float

    def to_dict(self) -> dict[str, object]:
        return {
            "per_entity_divergence": {
                k: self.per_entity_divergence[k]
                for k in sorted(self.per_entity_divergence)
            },
            "mean_common": self.mean_common,
            "sigma": self.sigma,
            "n_common": self.n_common,
            "me_penalty": self.me_penalty,
            "ae_penalty": self.ae_penalty,
            "total": self.total,
        }


def ecd_score(
    context: AnnotatedDoc,
    generated: AnnotatedDoc,
    config: EcdConfig = EcdConfig(),
) -> EcdBreakdown:
    """Score a generation against its context; see the module docstring."""
    partition = partition_entities(context.entities, generated.entities)
    mean_common, per_entity, sigma = common_divergence(
        context, generated, partition, config
    )
    n_common = len(partition.common)
    divisor = max(n_common, 1)
    me = missing_penalty(partition, context.entities, sigma, divisor)
    ae = added_penalty(partition, generated.entities, sigma, divisor)
    return EcdBreakdown(
        per_entity_divergence=per_entity,
        mean_common=mean_common,
        sigma=sigma,
        n_common=n_common,
        me_penalty=me,
        ae_penalty=ae,
        total=mean_common + me + ae,
    )
