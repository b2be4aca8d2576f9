"""Acceptance gate: one test per release criterion, with a printed verdict.

Run with `pytest -s tests/test_acceptance.py` to see one PASS/FAIL line per
criterion.  Each test is self-contained so the gate reads top to bottom.
"""
import itertools
import json
import math
import random
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from ecd_eval.cli import main as cli_main
from ecd_eval.context_builder import (
    RetrievedDoc,
    build_context,
    synthesize_corrupted_context,
)
from ecd_eval.metric import (
    EcdConfig,
    ecd_score,
    jaccard_divergence,
    partition_entities,
)
from ecd_eval.preference import (
    Candidate,
    FEATURE_NAMES,
    PromptGroup,
    ToyPolicy,
    TrainConfig,
    build_pairs,
    dpo_ecd_gradient,
    dpo_ecd_loss,
    mean_argmax_ecd,
    score_candidates,
    train_toy,
)
from ecd_eval.ragability import ScenarioRun, kde, profile, score_run
from ecd_eval.spectral import (
    LayerFit,
    LayerSpectrum,
    SpectralStats,
    combine_layer_fits,
    compare_stats,
    fit_power_law,
)
from ecd_eval.text import AnnotatedDoc

from corpus_tools import (
    ENTITY_POOL,
    FILLER,
    half_divergent_pair,
    materialize,
    random_annotated_pair,
    random_words,
)
from ecd_eval.metric import EcdBreakdown
from ecd_oracle import oracle_ecd

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "canonical_example"


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"FAIL {name}")
        raise
    else:
        print(f"PASS {name}")


def load_fixture_pair() -> tuple[AnnotatedDoc, AnnotatedDoc]:
    annotations: dict[str, list[dict]] = {}
    for line in (FIXTURE / "annotations.jsonl").read_text(encoding="utf-8").splitlines():
        rec = json.loads(line)
        annotations.setdefault(rec["doc_id"], []).extend(rec["entities"])
    docs = {}
    for doc_id in ("context", "generated"):
        text = (FIXTURE / f"{doc_id}.txt").read_text(encoding="utf-8")
        doc, rejected = AnnotatedDoc.from_records(text, annotations[doc_id], doc_id)
        assert rejected == []
        docs[doc_id] = doc
    return docs["context"], docs["generated"]


def annotated_pair_from_records(rng: random.Random, **kwargs):
    ctx_text, ctx_records, gen_text, gen_records = random_annotated_pair(rng, **kwargs)
    ctx, rej_c = AnnotatedDoc.from_records(ctx_text, ctx_records, "ctx")
    gen, rej_g = AnnotatedDoc.from_records(gen_text, gen_records, "gen")
    assert rej_c == [] and rej_g == []
    return ctx, gen


class TestMetricCriteria:
    def test_c01_reference_fixture_totals_five_and_a_half(self):
        with criterion("c01 reference fixture: total 5.5 +/- 1e-12 in under 1 s"):
            started = time.monotonic()
            context, generated = load_fixture_pair()
            config = EcdConfig(window_half_size=3, sigma_mode="fixed", sigma_value=0.5)
            breakdown = ecd_score(context, generated, config)

            part = partition_entities(context.entities, generated.entities)
            assert part.common == {"modi", "india"}
            assert {context.entities.rank_of(k) for k in part.missing} == {2, 3, 4}
            assert {generated.entities.rank_of(k) for k in part.added} == {2, 3, 4}
            for key in sorted(part.common):
                ctx_window = context.window(key, 3).words
                gen_window = generated.window(key, 3).words
                assert not (ctx_window & gen_window)

            assert breakdown.n_common == 2
            assert breakdown.mean_common == pytest.approx(1.0, abs=1e-12)
            assert breakdown.me_penalty == pytest.approx(2.25, abs=1e-12)
            assert breakdown.ae_penalty == pytest.approx(2.25, abs=1e-12)
            assert breakdown.total == pytest.approx(5.5, abs=1e-12)
            assert time.monotonic() - started < 1.0

    def test_c01_companion_undivided_walkthrough_value(self):
        # The walkthrough this fixture mirrors reports 1 + 4.5 + 4.5 = 10 by
        # skipping the division by the shared-entity count; the normative
        # formula divides, giving 1 + 2.25 + 2.25 = 5.5.  Recorded here so
        # the discrepancy stays visible.
        with criterion("c01 companion: undivided walkthrough value is 10"):
            context, generated = load_fixture_pair()
            config = EcdConfig(window_half_size=3, sigma_mode="fixed", sigma_value=0.5)
            breakdown = ecd_score(context, generated, config)
            undivided_me = breakdown.me_penalty * breakdown.n_common
            undivided_ae = breakdown.ae_penalty * breakdown.n_common
            assert undivided_me == pytest.approx(4.5, abs=1e-12)
            assert undivided_ae == pytest.approx(4.5, abs=1e-12)
            assert breakdown.mean_common + undivided_me + undivided_ae == pytest.approx(
                10.0, abs=1e-12
            )

    def test_c02_fully_disjoint_windows_diverge_exactly_one(self):
        with criterion("c02 shared-entity windows disjoint: divergence exactly 1.0"):
            context, generated = load_fixture_pair()
            ctx_window = context.window("modi", 3).words
            gen_window = generated.window("modi", 3).words
            assert len(ctx_window | gen_window) == 6
            assert not (ctx_window & gen_window)
            assert jaccard_divergence(ctx_window, gen_window) == 1.0
            config = EcdConfig(window_half_size=3, sigma_mode="fixed", sigma_value=0.5)
            breakdown = ecd_score(context, generated, config)
            assert breakdown.per_entity_divergence["modi"] == 1.0

    def test_c03_metric_axioms_over_1500_random_cases(self):
        with criterion("c03 metric axioms: 1500 random cases"):
            rng = random.Random(20240817)
            config = EcdConfig()

            checked_self = 0
            while checked_self < 500:
                words = random_words(rng, ENTITY_POOL)
                text, records = materialize(words)
                if not records:
                    continue
                doc, rejected = AnnotatedDoc.from_records(text, records, "doc")
                assert rejected == []
                breakdown = ecd_score(doc, doc, config)
                assert breakdown.total == 0.0
                assert breakdown.me_penalty == 0.0
                assert breakdown.ae_penalty == 0.0
                checked_self += 1

            for _ in range(500):
                ctx, gen = annotated_pair_from_records(rng)
                b = ecd_score(ctx, gen, config)
                assert b.total >= 0.0
                assert b.mean_common >= 0.0
                assert b.me_penalty >= 0.0 and b.ae_penalty >= 0.0
                decomposition = b.mean_common + b.me_penalty + b.ae_penalty
                assert abs(b.total - decomposition) <= 1e-12

            vocabulary = FILLER + [e.casefold() for e in ENTITY_POOL]
            for _ in range(500):
                a, b, c = (
                    frozenset(rng.sample(vocabulary, rng.randint(0, 8)))
                    for _ in range(3)
                )
                dab = jaccard_divergence(a, b)
                assert dab == jaccard_divergence(b, a)
                assert 0.0 <= dab <= 1.0
                assert jaccard_divergence(a, c) <= dab + jaccard_divergence(b, c) + 1e-12

    def test_c04_brute_force_oracle_agreement_on_500_pairs(self):
        with criterion("c04 oracle equivalence: 500 random pairs to 1e-12 in under 30 s"):
            started = time.monotonic()
            rng = random.Random(99173)
            for i in range(500):
                ctx_text, ctx_records, gen_text, gen_records = random_annotated_pair(
                    rng, force_share=(i % 3 != 0), max_tokens=30
                )
                w = rng.choice([1, 2, 3, 5, 10])
                sigma = rng.choice([None, 0.5, 1.3])
                expected = oracle_ecd(
                    ctx_text, ctx_records, gen_text, gen_records,
                    w=w, sigma_fixed=sigma, zero_common_sentinel=True,
                )
                ctx, _ = AnnotatedDoc.from_records(ctx_text, ctx_records, "ctx")
                gen, _ = AnnotatedDoc.from_records(gen_text, gen_records, "gen")
                config = EcdConfig(
                    window_half_size=w,
                    sigma_mode="computed" if sigma is None else "fixed",
                    sigma_value=sigma,
                    zero_common_policy="sentinel",
                )
                got = ecd_score(ctx, gen, config)
                assert abs(got.total - expected["total"]) <= 1e-12
                assert abs(got.mean_common - expected["mean_common"]) <= 1e-12
                assert abs(got.me_penalty - expected["me"]) <= 1e-12
                assert abs(got.ae_penalty - expected["ae"]) <= 1e-12
                assert abs(got.sigma - expected["sigma"]) <= 1e-12
                assert got.n_common == expected["n_common"]
            assert time.monotonic() - started < 30.0


def scored_run_from_texts(pair_texts, scenario="synthetic") -> ScenarioRun:
    doc_pairs = []
    for i, (ctx_text, gen_text) in enumerate(pair_texts):
        ctx = AnnotatedDoc.from_text(ctx_text, f"c{i}")
        gen = AnnotatedDoc.from_text(gen_text, f"g{i}")
        doc_pairs.append((ctx, gen))
    return score_run(scenario, doc_pairs, EcdConfig())


class TestDensityCriteria:
    def test_c05_density_semantics(self):
        with criterion("c05 density: shift covariance, unit mass, zero-centered self-pairs"):
            rng = np.random.default_rng(20240817)
            samples = rng.normal(0.0, 1.0, 200)
            base = kde(samples)
            shift = 0.37
            moved = kde(samples + shift)
            step = float(base.grid[1] - base.grid[0])
            assert abs(moved.peak - (base.peak + shift)) <= step + 1e-9
            assert np.trapezoid(base.density, base.grid) == pytest.approx(1.0, abs=1e-3)
            assert np.trapezoid(moved.density, moved.grid) == pytest.approx(1.0, abs=1e-3)

            mixed_texts = []
            for i in range(30):
                ctx_text, _ = half_divergent_pair(i)
                mixed_texts.append((ctx_text, ctx_text))
            for i in range(10):
                mixed_texts.append(half_divergent_pair(100 + i))
            mixed = profile(scored_run_from_texts(mixed_texts))
            assert np.trapezoid(mixed.green_density, mixed.grid) == pytest.approx(
                1.0, abs=1e-3
            )
            assert np.trapezoid(mixed.blue_density, mixed.grid) == pytest.approx(
                1.0, abs=1e-3
            )

            self_texts = []
            for i in range(25):
                ctx_text, _ = half_divergent_pair(i)
                self_texts.append((ctx_text, ctx_text))
            bandwidth = 0.05
            self_profile = profile(scored_run_from_texts(self_texts), bandwidth=bandwidth)
            assert abs(self_profile.green_peak) <= bandwidth
            assert abs(self_profile.blue_peak) <= bandwidth


TEN_SENTENCES = [
    RetrievedDoc(
        id="solar",
        source_uri="mem://solar",
        text=(
            "Solar panels convert sunlight into electricity. "
            "Batteries store surplus renewable output. "
            "Inverters shape alternating current. "
            "Grids balance regional demand."
        ),
    ),
    RetrievedDoc(
        id="cheese",
        source_uri="mem://cheese",
        text=(
            "Cheese ages in cool cellars. "
            "Rinds develop slowly over months. "
            "Caves keep humidity steady."
        ),
    ),
    RetrievedDoc(
        id="wind",
        source_uri="mem://wind",
        text=(
            "Wind turbines harvest moving air. "
            "Blades sweep enormous circles. "
            "Gearboxes multiply rotation speed."
        ),
    ),
]


class TestContextBuilderCriteria:
    def test_c06_context_builder_selection(self):
        with criterion("c06 context builder: 3 of 10 sentences, verbatim first, order-free"):
            query = "Batteries store surplus renewable output."
            built = build_context(query, TEN_SENTENCES, fraction=0.30)
            assert len(built.sentences) == 3
            top = built.sentences[0]
            assert top.text == query
            assert top.similarity == pytest.approx(1.0, abs=1e-9)
            assert all(s.similarity <= top.similarity for s in built.sentences)

            reference = [
                (s.doc_id, s.sentence_index, s.text, s.similarity)
                for s in built.sentences
            ]
            for docs in itertools.permutations(TEN_SENTENCES):
                permuted = build_context(query, list(docs), fraction=0.30)
                got = [
                    (s.doc_id, s.sentence_index, s.text, s.similarity)
                    for s in permuted.sentences
                ]
                assert got == reference


def synthetic_total_group(prompt_id: str, totals: dict[str, float]) -> PromptGroup:
    def breakdown(total: float) -> EcdBreakdown:
        return EcdBreakdown(
            per_entity_divergence={},
            mean_common=0.0,
            sigma=0.0,
            n_common=1,
            me_penalty=total,
            ae_penalty=0.0,
            total=total,
        )

    context = AnnotatedDoc.from_text("Leaders met Modi in India today.", prompt_id)
    candidates = tuple(
        Candidate(
            prompt_id=prompt_id,
            candidate_id=cid,
            text=AnnotatedDoc.from_text(f"candidate words {cid}", f"{prompt_id}/{cid}"),
            ecd=breakdown(total),
        )
        for cid, total in sorted(totals.items())
    )
    return PromptGroup(prompt_id=prompt_id, context=context, candidates=candidates)


def real_prompt_groups(seed: int, n_prompts: int) -> dict[str, PromptGroup]:
    rng = random.Random(seed)
    config = EcdConfig(zero_common_policy="sentinel")
    groups: dict[str, PromptGroup] = {}
    for i in range(n_prompts):
        ctx_text, _ = materialize(random_words(rng, entities=ENTITY_POOL[:2]))
        context = AnnotatedDoc.from_text(ctx_text, f"ctx{i}")
        candidates: dict[str, AnnotatedDoc] = {}
        for j in range(rng.randint(2, 4)):
            pool = ENTITY_POOL[: rng.randint(0, 2)]
            if pool:
                words = random_words(rng, entities=pool)
            else:
                words = [rng.choice(FILLER) for _ in range(rng.randint(4, 12))]
            text, _ = materialize(words)
            candidates[f"c{j}"] = AnnotatedDoc.from_text(text, f"p{i}c{j}")
        groups[f"p{i}"] = score_candidates(f"p{i}", context, candidates, config)
    return groups


def separable_prompt_groups() -> tuple[dict[str, PromptGroup], list]:
    config = EcdConfig(zero_common_policy="sentinel")
    spec = [
        ("p1", "Leaders met Modi in India today.",
         "Reports said Modi toured India.", "Weather stayed calm overnight."),
        ("p2", "Delegates greeted Modi in Berlin.",
         "Observers saw Modi visit Berlin.", "Markets drifted sideways quietly."),
        ("p3", "Envoys from Acme reached Zurich.",
         "Staff at Acme settled Zurich.", "Rain fell across empty fields."),
    ]
    groups = {}
    for pid, ctx_text, good, bad in spec:
        context = AnnotatedDoc.from_text(ctx_text, pid + "-ctx")
        groups[pid] = score_candidates(
            pid,
            context,
            {
                "good": AnnotatedDoc.from_text(good, pid + "-good"),
                "bad": AnnotatedDoc.from_text(bad, pid + "-bad"),
            },
            config,
        )
    return groups, build_pairs(groups.values())


class TestPreferenceCriteria:
    def test_c07_preference_training_pipeline(self):
        with criterion(
            "c07 preference: mined order, FD gradient < 1e-5, affine loss, "
            "separable improvement, under 60 s"
        ):
            started = time.monotonic()

            rng = random.Random(424242)
            for i in range(100):
                totals = {
                    f"c{j}": rng.uniform(0.0, 4.0) for j in range(rng.randint(2, 6))
                }
                (pair,) = build_pairs([synthetic_total_group(f"p{i}", totals)])
                assert pair.chosen.ecd.total < pair.rejected.ecd.total

            np_rng = np.random.default_rng(20240817)
            worst = 0.0
            h = 1e-5
            for trial in range(20):
                groups = real_prompt_groups(2000 + trial, int(np_rng.integers(2, 5)))
                pairs = build_pairs(groups.values())
                if not pairs:
                    continue
                weights = np_rng.normal(scale=0.7, size=len(FEATURE_NAMES))
                gamma = float(np_rng.uniform(0, 3))
                analytic = dpo_ecd_gradient(ToyPolicy(weights=weights), pairs, groups, gamma)
                numeric = np.zeros_like(weights)
                for k in range(weights.size):
                    up, down = weights.copy(), weights.copy()
                    up[k] += h
                    down[k] -= h
                    numeric[k] = (
                        dpo_ecd_loss(ToyPolicy(weights=up), pairs, groups, gamma)
                        - dpo_ecd_loss(ToyPolicy(weights=down), pairs, groups, gamma)
                    ) / (2 * h)
                denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
                worst = max(worst, np.linalg.norm(analytic - numeric) / denom)
            assert worst < 1e-5

            groups = real_prompt_groups(777, 6)
            pairs = build_pairs(groups.values())
            policy = ToyPolicy.initialize(seed=4, scale=0.6)
            base_loss = dpo_ecd_loss(policy, pairs, groups, gamma=0.0)
            mean_gap = sum(p.gap for p in pairs) / len(pairs)
            for gamma in (0.25, 1.0, 2.0, 3.7):
                assert dpo_ecd_loss(policy, pairs, groups, gamma) == (
                    base_loss - gamma * mean_gap
                )

            groups, pairs = separable_prompt_groups()
            start_policy = ToyPolicy(weights=np.array([-0.5, -0.5, 0.0]))
            trained, metrics = train_toy(
                start_policy, pairs, groups,
                TrainConfig(gamma=1.0, learning_rate=0.5, epochs=40),
            )
            final = mean_argmax_ecd(trained, groups)
            assert final < metrics[0].mean_argmax_ecd

            assert time.monotonic() - started < 60.0


class TestSpectralCriteria:
    def test_c08_spectral_recovery_identities_and_drift(self):
        with criterion(
            "c08 spectral: Pareto alpha 3 +/- 0.15, exact aggregation, "
            "10% drift gate, under 30 s"
        ):
            started = time.monotonic()

            rng = np.random.default_rng(20240817)
            sample = 1.0 * rng.random(5000) ** (-1.0 / 2.0)
            spectrum = LayerSpectrum("pareto", np.sort(sample)[::-1])
            fit = fit_power_law(spectrum, xmin=1.0)
            assert abs(fit.alpha - 3.0) <= 0.15

            single = LayerFit(
                layer_id="a", alpha=3.0, lambda_max=math.e, xmin=1.0, n_tail=9
            )
            assert combine_layer_fits([single]) == pytest.approx(3.0, abs=1e-12)
            double = [
                LayerFit(layer_id="a", alpha=2.0, lambda_max=math.e**2, xmin=1.0, n_tail=9),
                LayerFit(layer_id="b", alpha=4.0, lambda_max=math.e, xmin=1.0, n_tail=9),
            ]
            assert combine_layer_fits(double) == pytest.approx(4.0, abs=1e-12)

            def stats(value: float) -> SpectralStats:
                return SpectralStats(
                    per_layer=(
                        LayerFit(
                            layer_id="a", alpha=value, lambda_max=2.0, xmin=1.0, n_tail=9
                        ),
                    ),
                    weighted_alpha=value,
                )

            small = compare_stats(stats(3.0), stats(3.2), threshold=0.1)
            assert small.relative_drift == pytest.approx(0.2 / 3.0, rel=1e-12)
            assert small.passed
            large = compare_stats(stats(3.0), stats(3.5), threshold=0.1)
            assert large.relative_drift == pytest.approx(0.5 / 3.0, rel=1e-12)
            assert not large.passed

            assert time.monotonic() - started < 30.0


class TestCorruptionCriteria:
    def test_c09_corrupted_context_scores_above_zero(self):
        with criterion("c09 corruption: replaced entities push the score above 0"):
            text = "Leaders met Modi in India today. Experts praised Modi widely."
            original = AnnotatedDoc.from_text(text, "ctx")
            for table in (
                {"modi": "Tharoor"},
                {"india": "Norway"},
                {"modi": "Tharoor", "india": "Norway"},
            ):
                corrupted_doc = synthesize_corrupted_context(original, table, seed=0)
                corrupted = AnnotatedDoc.from_text(corrupted_doc.raw_text, "corrupted")
                breakdown = ecd_score(
                    original,
                    corrupted,
                    EcdConfig(zero_common_policy="sentinel"),
                )
                assert breakdown.total > 0.0


def write_jsonl_file(path: Path, rows) -> None:
    path.write_text(
        "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows),
        encoding="utf-8",
    )


def assert_same_tree_bytes(a: Path, b: Path) -> None:
    names_a = sorted(p.name for p in a.iterdir())
    names_b = sorted(p.name for p in b.iterdir())
    assert names_a == names_b
    for name in names_a:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


class TestDeterminismCriteria:
    def build_inputs(self, tmp_path: Path) -> dict[str, Path]:
        paths: dict[str, Path] = {}

        corpus_rows, manifest_rows = [], []
        for i in range(8):
            ctx_text, gen_text = half_divergent_pair(i)
            corpus_rows.append({"id": f"c{i}", "text": ctx_text})
            corpus_rows.append({"id": f"g{i}", "text": gen_text})
            manifest_rows.append(
                {"context_id": f"c{i}", "generated_id": f"g{i}", "scenario": "web_context"}
            )
            manifest_rows.append(
                {"context_id": f"c{i}", "generated_id": f"c{i}", "scenario": "web_context"}
            )
        paths["corpus"] = tmp_path / "corpus.jsonl"
        paths["manifest"] = tmp_path / "manifest.jsonl"
        write_jsonl_file(paths["corpus"], corpus_rows)
        write_jsonl_file(paths["manifest"], manifest_rows)

        docs = tmp_path / "docs"
        docs.mkdir()
        for doc in TEN_SENTENCES:
            (docs / f"{doc.id}.txt").write_text(doc.text, encoding="utf-8")
        paths["docs"] = docs

        paths["table"] = tmp_path / "table.json"
        paths["table"].write_text(
            json.dumps({"modi": ["Tharoor", "Gandhi", "Patel"]}), encoding="utf-8"
        )

        paths["contexts"] = tmp_path / "contexts.jsonl"
        write_jsonl_file(
            paths["contexts"],
            [
                {"id": "p1", "text": "Leaders met Modi in India today."},
                {"id": "p2", "text": "Delegates greeted Modi in Berlin."},
            ],
        )
        paths["candidates"] = tmp_path / "candidates.jsonl"
        write_jsonl_file(
            paths["candidates"],
            [
                {"prompt_id": "p1", "candidate_id": "good",
                 "text": "Reports said Modi toured India."},
                {"prompt_id": "p1", "candidate_id": "bad",
                 "text": "Weather stayed calm overnight."},
                {"prompt_id": "p2", "candidate_id": "good",
                 "text": "Observers saw Modi visit Berlin."},
                {"prompt_id": "p2", "candidate_id": "bad",
                 "text": "Markets drifted sideways quietly."},
            ],
        )

        rng = np.random.default_rng(20240817)
        layers = tmp_path / "layers"
        layers.mkdir()
        entries = []
        for i, shape in enumerate([(40, 30), (50, 25)]):
            matrix = rng.normal(size=shape)
            matrix.astype(np.float64).tofile(layers / f"l{i}.bin")
            entries.append(
                {"id": f"l{i}", "path": f"l{i}.bin", "rows": shape[0],
                 "cols": shape[1], "dtype": "f64"}
            )
        paths["layers"] = layers / "layers.json"
        paths["layers"].write_text(json.dumps({"layers": entries}), encoding="utf-8")
        return paths

    def test_c10_every_subcommand_is_byte_deterministic(self, tmp_path, capsys):
        with criterion("c10 determinism: all 9 subcommands byte-identical across runs"):
            paths = self.build_inputs(tmp_path)
            commands = {
                "score": [
                    "score",
                    str(FIXTURE / "context.txt"),
                    str(FIXTURE / "generated.txt"),
                    "--annotations", str(FIXTURE / "annotations.jsonl"),
                    "--window", "3", "--sigma", "0.5",
                ],
                "batch-score": [
                    "batch-score", "--corpus", str(paths["corpus"]),
                    "--manifest", str(paths["manifest"]), "--jobs", "4",
                ],
                "profile": [
                    "profile", "--corpus", str(paths["corpus"]),
                    "--manifest", str(paths["manifest"]),
                ],
                "build-context": [
                    "build-context", "--query",
                    "Batteries store surplus renewable output.",
                    "--docs", str(paths["docs"]), "--fraction", "0.3",
                ],
                "corrupt": [
                    "corrupt", str(FIXTURE / "context.txt"),
                    "--annotations", str(FIXTURE / "annotations.jsonl"),
                    "--table", str(paths["table"]), "--seed", "7",
                ],
                "pairs": [
                    "pairs", "--contexts", str(paths["contexts"]),
                    "--candidates", str(paths["candidates"]),
                    "--zero-common", "sentinel",
                ],
                "train-toy": [
                    "train-toy", "--contexts", str(paths["contexts"]),
                    "--candidates", str(paths["candidates"]),
                    "--zero-common", "sentinel", "--epochs", "3",
                    "--lr", "0.5", "--seed", "0",
                ],
                "alpha": ["alpha", "--layers", str(paths["layers"])],
                "drift": [
                    "drift", "--before", str(paths["layers"]),
                    "--after", str(paths["layers"]),
                ],
            }
            for name, args in commands.items():
                out_a = tmp_path / f"{name}-a"
                out_b = tmp_path / f"{name}-b"
                assert cli_main(args + ["--out", str(out_a)]) == 0, name
                stdout_a = capsys.readouterr().out
                assert cli_main(args + ["--out", str(out_b)]) == 0, name
                stdout_b = capsys.readouterr().out
                assert stdout_a == stdout_b, name
                assert_same_tree_bytes(out_a, out_b)
