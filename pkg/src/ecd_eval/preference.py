"""Preference pairs from ECD scores and a toy policy trained on them.

The training objective rewards the policy for preferring the candidate
with the lower ECD:

    J(pair) = log pi(chosen | prompt) - log pi(rejected | prompt)
              + gamma * (ECD(rejected) - ECD(chosen))
    loss    = -mean(J)

The ECD terms do not depend on the policy parameters, so the gradient is
the difference of the two log-probability gradients; gamma moves the loss
by a constant and never the direction of descent.  The toy policy is a
softmax over each prompt's candidate set with linear features.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ecd_eval.jsonio import write_jsonl
from ecd_eval.metric import EcdBreakdown, EcdConfig, ecd_score
from ecd_eval.text import AnnotatedDoc

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("entity_overlap", "word_overlap", "bias")


@dataclass(frozen=True)
class Candidate:
    """One candidate answer for a prompt, already scored against the context."""

    prompt_id: str
    candidate_id: str
    text: AnnotatedDoc
    ecd: EcdBreakdown


@dataclass(frozen=True)
class PromptGroup:
    """All candidates competing for one prompt, plus the shared context."""

    prompt_id: str
    context: AnnotatedDoc
    candidates: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise ValueError(f"prompt {self.prompt_id!r} has no candidates")
        ids = [c.candidate_id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise ValueError(f"prompt {self.prompt_id!r} has duplicate candidate ids")

    def get(self, candidate_id: str) -> Candidate:
        for c in self.candidates:
            if c.candidate_id == candidate_id:
                return c
        raise ValueError(
            f"candidate {candidate_id!r} is not in the set for {self.prompt_id!r}"
        )


def score_candidates(
    prompt_id: str,
    context: AnnotatedDoc,
    candidates: Mapping[str, AnnotatedDoc],
    config: EcdConfig = EcdConfig(),
) -> PromptGroup:
    """Score every candidate against the context and assemble a group.

    Candidates are kept in candidate-id order so downstream argmax ties
    resolve the same way on every run.
    """
    scored = tuple(
        Candidate(
            prompt_id=prompt_id,
            candidate_id=cid,
            text=candidates[cid],
            ecd=ecd_score(context, candidates[cid], config),
        )
        for cid in sorted(candidates)
    )
    return PromptGroup(prompt_id=prompt_id, context=context, candidates=scored)


@dataclass(frozen=True)
class PreferencePair:
    prompt_id: str
    context: AnnotatedDoc
    chosen: Candidate
    rejected: Candidate

    @property
    def gap(self) -> float:
        return self.rejected.ecd.total - self.chosen.ecd.total


def build_pairs(
    groups: Iterable[PromptGroup], min_gap: float = 0.0
) -> list[PreferencePair]:
    """Pick (lowest ECD, highest ECD) per prompt; skip gaps below min_gap.

    Ties break lexicographically: the chosen side takes the first
    candidate id, the rejected side the last, so a valid pair never
    pits a candidate against itself.  Skipped prompts are logged.
    """
    if min_gap < 0:
        raise ValueError("min_gap must be >= 0")
    pairs: list[PreferencePair] = []
    for group in groups:
        if len(group.candidates) < 2:
            logger.info("skipping %s: fewer than two candidates", group.prompt_id)
            continue
        chosen = min(group.candidates, key=lambda c: (c.ecd.total, c.candidate_id))
        rejected = max(group.candidates, key=lambda c: (c.ecd.total, c.candidate_id))
        gap = rejected.ecd.total - chosen.ecd.total
        if gap < min_gap:
            logger.info(
                "skipping %s: gap %.6g below min_gap %.6g", group.prompt_id, gap, min_gap
            )
            continue
        pairs.append(
            PreferencePair(
                prompt_id=group.prompt_id,
                context=group.context,
                chosen=chosen,
                rejected=rejected,
            )
        )
    return pairs


def export_pairs(pairs: Sequence[PreferencePair], path: str | Path) -> None:
    """Write pairs as JSONL records ready for a preference-training stack."""
    rows = [
        {
            "prompt": p.prompt_id,
            "context": p.context.doc.raw_text,
            "chosen": p.chosen.text.doc.raw_text,
            "rejected": p.rejected.text.doc.raw_text,
            "ecd_chosen": p.chosen.ecd.total,
            "ecd_rejected": p.rejected.ecd.total,
        }
        for p in pairs
    ]
    write_jsonl(path, rows)


def features(context: AnnotatedDoc, candidate: AnnotatedDoc) -> np.ndarray:
    """Three cheap alignment features: entity overlap, word overlap, bias."""
    ctx_keys = context.entities.keys()
    cand_keys = candidate.entities.keys()
    entity_overlap = len(ctx_keys & cand_keys) / max(1, len(ctx_keys))

    ctx_words = {t.normalized for t in context.doc.tokens if not t.is_punctuation}
    cand_words = {t.normalized for t in candidate.doc.tokens if not t.is_punctuation}
    word_overlap = len(ctx_words & cand_words) / max(1, len(cand_words))

    return np.array([entity_overlap, word_overlap, 1.0], dtype=float)


@dataclass(frozen=True, eq=False)
class ToyPolicy:
    """Linear-feature softmax over each prompt's candidate set."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.weights.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"weights must have shape ({len(FEATURE_NAMES)},)")

    @classmethod
    def initialize(cls, seed: int = 0, scale: float = 0.1) -> "ToyPolicy":
        rng = np.random.default_rng(seed)
        return cls(weights=scale * rng.standard_normal(len(FEATURE_NAMES)))

    def _feature_matrix(self, group: PromptGroup) -> np.ndarray:
        return np.stack([features(group.context, c.text) for c in group.candidates])

    def scores(self, group: PromptGroup) -> np.ndarray:
        return self._feature_matrix(group) @ self.weights

    def distribution(self, group: PromptGroup) -> np.ndarray:
        s = self.scores(group)
        s = s - s.max()
        e = np.exp(s)
        return e / e.sum()

    def log_prob(self, group: PromptGroup, candidate_id: str) -> float:
        s = self.scores(group)
        idx = self._index(group, candidate_id)
        shifted = s - s.max()
        return float(shifted[idx] - np.log(np.exp(shifted).sum()))

    def log_prob_gradient(self, group: PromptGroup, candidate_id: str) -> np.ndarray:
        phi = self._feature_matrix(group)
        pi = self.distribution(group)
        idx = self._index(group, candidate_id)
        return phi[idx] - pi @ phi

    @staticmethod
    def _index(group: PromptGroup, candidate_id: str) -> int:
        for i, c in enumerate(group.candidates):
            if c.candidate_id == candidate_id:
                return i
        raise ValueError(
            f"candidate {candidate_id!r} is not in the set for {group.prompt_id!r}"
        )


def _group_for(pair: PreferencePair, groups: Mapping[str, PromptGroup]) -> PromptGroup:
    group = groups.get(pair.prompt_id)
    if group is None:
        raise ValueError(f"no candidate group for prompt {pair.prompt_id!r}")
    return group


def dpo_ecd_objective(
    policy: ToyPolicy,
    pair: PreferencePair,
    groups: Mapping[str, PromptGroup],
    gamma: float,
) -> float:
    """Per-pair objective: log-prob margin plus gamma times the ECD gap."""
    group = _group_for(pair, groups)
    margin = policy.log_prob(group, pair.chosen.candidate_id) - policy.log_prob(
        group, pair.rejected.candidate_id
    )
    return margin + gamma * pair.gap


def dpo_ecd_loss(
    policy: ToyPolicy,
    pairs: Sequence[PreferencePair],
    groups: Mapping[str, PromptGroup],
    gamma: float,
) -> float:
    """Negative mean objective over a batch.

    Computed as -(mean margin + gamma * mean gap), which is the same mean
    but keeps the loss exactly affine in gamma.
    """
    if not pairs:
        raise ValueError("empty pair batch")
    margin_sum = 0.0
    gap_sum = 0.0
    for pair in pairs:
        group = _group_for(pair, groups)
        margin_sum += policy.log_prob(group, pair.chosen.candidate_id) - policy.log_prob(
            group, pair.rejected.candidate_id
        )
        gap_sum += pair.gap
    n = len(pairs)
    return -(margin_sum / n + gamma * (gap_sum / n))


def dpo_ecd_gradient(
    policy: ToyPolicy,
    pairs: Sequence[PreferencePair],
    groups: Mapping[str, PromptGroup],
    gamma: float,
) -> np.ndarray:
    """Analytic loss gradient; the ECD terms are constant in the weights."""
    if not pairs:
        raise ValueError("empty pair batch")
    del gamma  # affects the loss by a constant only
    grad = np.zeros_like(policy.weights)
    for pair in pairs:
        group = _group_for(pair, groups)
        grad -= policy.log_prob_gradient(group, pair.chosen.candidate_id)
        grad += policy.log_prob_gradient(group, pair.rejected.candidate_id)
    return grad / len(pairs)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 1.0
    learning_rate: float = 0.1
    epochs: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        # 0 is allowed so a no-op run can serve as a baseline.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class EpochMetrics:
    """State at the start of an epoch, before that epoch's step."""

    epoch: int
    loss: float
    mean_argmax_ecd: float


def mean_argmax_ecd(policy: ToyPolicy, groups: Mapping[str, PromptGroup]) -> float:
    """Mean ECD total of the policy's argmax candidate across prompts."""
    if not groups:
        raise ValueError("no prompt groups")
    totals = []
    for prompt_id in sorted(groups):
        group = groups[prompt_id]
        idx = int(np.argmax(policy.scores(group)))
        totals.append(group.candidates[idx].ecd.total)
    return float(np.mean(totals))


def train_toy(
    policy: ToyPolicy,
    pairs: Sequence[PreferencePair],
    groups: Mapping[str, PromptGroup],
    config: TrainConfig = TrainConfig(),
) -> tuple[ToyPolicy, list[EpochMetrics]]:
    """Full-batch gradient descent; one step per epoch.

    Metrics record the state entering each epoch, so metrics[0] describes
    the untrained policy and epochs steps are taken in total.
    """
    if not pairs:
        raise ValueError("empty pair batch")
    metrics: list[EpochMetrics] = []
    for epoch in range(1, config.epochs + 1):
        loss = dpo_ecd_loss(policy, pairs, groups, config.gamma)
        if not np.isfinite(loss):
            raise RuntimeError(f"non-finite loss {loss!r} at epoch {epoch}")
        metrics.append(
            EpochMetrics(
                epoch=epoch,
                loss=loss,
                mean_argmax_ecd=mean_argmax_ecd(policy, groups),
            )
        )
        grad = dpo_ecd_gradient(policy, pairs, groups, config.gamma)
        policy = ToyPolicy(weights=policy.weights - config.learning_rate * grad)
    return policy, metrics


def write_epoch_metrics(metrics: Sequence[EpochMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss", "mean_argmax_ecd"])
        for m in metrics:
            writer.writerow([m.epoch, repr(float(m.loss)), repr(float(m.mean_argmax_ecd))])
