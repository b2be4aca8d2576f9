"""Command-line front end.

Exit codes: 0 success, 2 unreadable or malformed input, 3 domain errors
(no common entities, unknown keys, unfittable spectra), 4 degenerate
samples that cannot support a density estimate.  Every command writing an
output directory drops a run_config.json snapshot of the resolved
parameters, and all JSON/CSV outputs are byte-deterministic for a fixed
seed.  Defaults can also come from a JSON config file passed with
--config or the ECD_EVAL_CONFIG environment variable; explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ecd_eval.context_builder import (
    ExternalVectors,
    RetrievedDoc,
    build_context,
    synthesize_corrupted_context,
)
from ecd_eval.jsonio import (
    CsvColumn,
    InputError,
    dump_json,
    load_annotated_corpus,
    read_annotation_file,
    read_corpus,
    read_jsonl,
    read_manifest,
    read_vectors,
    write_csv,
    write_json,
)
from ecd_eval.metric import EcdConfig, NoCommonEntitiesError, ecd_score
from ecd_eval.preference import (
    FEATURE_NAMES,
    ToyPolicy,
    TrainConfig,
    build_pairs,
    export_pairs,
    score_candidates,
    train_toy,
    write_epoch_metrics,
)
from ecd_eval.ragability import DegenerateSampleError, profile, score_pairs
from ecd_eval.spectral import compare_stats, load_layer_manifest, weighted_alpha
from ecd_eval.svgplot import density_svg
from ecd_eval.text import AnnotatedDoc

CONFIG_ENV_VAR = "ECD_EVAL_CONFIG"

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# configuration resolution

def _load_config(args: argparse.Namespace) -> dict:
    path = args.config if args.config is not None else os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path}: invalid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise InputError(f"config {path}: expected a JSON object")
    return config


def _resolve(args: argparse.Namespace, config: dict, name: str, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _metric_config(args: argparse.Namespace, config: dict) -> tuple[EcdConfig, dict]:
    window = int(_resolve(args, config, "window", 10))
    sigma = _resolve(args, config, "sigma", None)
    sigma = float(sigma) if sigma is not None else None
    default_mode = "fixed" if sigma is not None else "computed"
    sigma_mode = str(_resolve(args, config, "sigma_mode", default_mode))
    zero_common = str(_resolve(args, config, "zero_common", "error"))
    try:
        cfg = EcdConfig(
            window_half_size=window,
            sigma_mode=sigma_mode,
            sigma_value=sigma,
            zero_common_policy=zero_common,
        )
    except ValueError as exc:
        # Bad flag combinations are usage errors, not domain errors.
        raise InputError(str(exc)) from exc
    params = {
        "window": window,
        "sigma_mode": sigma_mode,
        "sigma": sigma,
        "zero_common": zero_common,
    }
    return cfg, params


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run_config(out: Path, command: str, params: dict, inputs: dict) -> None:
    write_json(out / "run_config.json", {
        "command": command,
        "params": params,
        "inputs": inputs,
    })


def _warn_rejected(rejected) -> None:
    for rec in rejected:
        logger.warning("rejected annotation for %s (%s): %s", rec.doc_id, rec.key, rec.reason)


# ---------------------------------------------------------------------------
# document loading helpers

def _read_text_file(path: str) -> tuple[str, str]:
    p = Path(path)
    try:
        return p.stem, p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _annotated_from_file(path: str, annotations_path: str | None) -> AnnotatedDoc:
    doc_id, text = _read_text_file(path)
    if annotations_path is None:
        return AnnotatedDoc.from_text(text, doc_id)
    table = read_annotation_file(annotations_path)
    records = table.get(doc_id)
    if records is None:
        return AnnotatedDoc.from_text(text, doc_id)
    annotated, rejected = AnnotatedDoc.from_records(text, records, doc_id)
    _warn_rejected(rejected)
    return annotated


def _load_corpus_docs(
    corpus_path: str, annotations_path: str | None
) -> dict[str, AnnotatedDoc]:
    docs, rejected = load_annotated_corpus(corpus_path, annotations_path)
    _warn_rejected(rejected)
    return docs


def _manifest_pairs(
    docs: dict[str, AnnotatedDoc], manifest_path: str
) -> tuple[list[tuple[AnnotatedDoc, AnnotatedDoc]], list[dict]]:
    entries = read_manifest(manifest_path)
    if not entries:
        raise InputError(f"{manifest_path}: manifest is empty")
    pairs = []
    for entry in entries:
        for field in ("context_id", "generated_id"):
            if entry[field] not in docs:
                raise InputError(
                    f"{manifest_path}: {field} {entry[field]!r} not in corpus"
                )
        pairs.append((docs[entry["context_id"]], docs[entry["generated_id"]]))
    return pairs, entries


# ---------------------------------------------------------------------------
# subcommands

def _cmd_score(args: argparse.Namespace) -> int:
    config = _load_config(args)
    cfg, params = _metric_config(args, config)
    context = _annotated_from_file(args.context, args.annotations)
    generated = _annotated_from_file(args.generated, args.annotations)
    breakdown = ecd_score(context, generated, cfg)
    sys.stdout.write(dump_json(breakdown.to_dict()))
    if args.out:
        out = _out_dir(args)
        write_json(out / "breakdown.json", breakdown.to_dict())
        _write_run_config(out, "score", params, {
            "context": args.context,
            "generated": args.generated,
            "annotations": args.annotations,
        })
    return 0


def _cmd_batch_score(args: argparse.Namespace) -> int:
    config = _load_config(args)
    cfg, params = _metric_config(args, config)
    jobs = int(_resolve(args, config, "jobs", 1))
    docs = _load_corpus_docs(args.corpus, args.annotations)
    doc_pairs, entries = _manifest_pairs(docs, args.manifest)
    breakdowns = score_pairs(doc_pairs, cfg, jobs=jobs)
    out = _out_dir(args)
    rows = []
    for entry, b in zip(entries, breakdowns):
        row = dict(entry)
        row.update(b.to_dict())
        rows.append(row)
    from ecd_eval.jsonio import write_jsonl

    write_jsonl(out / "breakdowns.jsonl", rows)
    _write_run_config(out, "batch-score", {**params, "jobs": jobs}, {
        "corpus": args.corpus,
        "manifest": args.manifest,
        "annotations": args.annotations,
    })
    sys.stdout.write(f"scored {len(rows)} pairs\n")
    return 0


def _cmd_profile(args: argparse.Namespace) -> int:
    config = _load_config(args)
    cfg, params = _metric_config(args, config)
    jobs = int(_resolve(args, config, "jobs", 1))
    grid_size = int(_resolve(args, config, "grid_size", 512))
    bandwidth = _resolve(args, config, "bandwidth", None)
    bandwidth = float(bandwidth) if bandwidth is not None else None

    docs = _load_corpus_docs(args.corpus, args.annotations)
    doc_pairs, entries = _manifest_pairs(docs, args.manifest)
    scenarios = sorted({e["scenario"] for e in entries})
    scenario = scenarios[0] if len(scenarios) == 1 else "mixed"

    from ecd_eval.ragability import score_run

    run = score_run(scenario, doc_pairs, cfg, jobs=jobs)
    prof = profile(run, grid_size=grid_size, bandwidth=bandwidth)

    out = _out_dir(args)
    write_csv(out / "profile.csv", [
        CsvColumn("grid", prof.grid.tolist()),
        CsvColumn("green_density", prof.green_density.tolist()),
        CsvColumn("blue_density", prof.blue_density.tolist()),
    ])
    (out / "profile.svg").write_text(
        density_svg(prof, title=f"RAG-ability profile: {scenario}"), encoding="utf-8"
    )
    write_json(out / "peaks.json", {
        "green_peak": prof.green_peak,
        "blue_peak": prof.blue_peak,
        "bandwidth": prof.bandwidth,
        "n_pairs": len(run.pairs),
        "scenario": scenario,
    })
    _write_run_config(
        out,
        "profile",
        {**params, "jobs": jobs, "grid_size": grid_size, "bandwidth": bandwidth},
        {
            "corpus": args.corpus,
            "manifest": args.manifest,
            "annotations": args.annotations,
        },
    )
    sys.stdout.write(
        f"green peak {prof.green_peak:.6f}, blue peak {prof.blue_peak:.6f}\n"
    )
    return 0


def _load_retrieved_docs(docs_path: str) -> list[RetrievedDoc]:
    path = Path(docs_path)
    if path.is_dir():
        files = sorted(path.glob("*.txt"))
        if not files:
            raise InputError(f"{docs_path}: no .txt files in directory")
        docs = []
        for f in files:
            try:
                text = f.read_text(encoding="utf-8")
            except OSError as exc:
                raise InputError(f"cannot read {f}: {exc}") from exc
            try:
                docs.append(RetrievedDoc(id=f.stem, source_uri=str(f), text=text))
            except ValueError as exc:
                raise InputError(str(exc)) from exc
        return docs
    corpus = read_corpus(path)
    try:
        return [
            RetrievedDoc(id=doc_id, source_uri=f"{path}#{doc_id}", text=text)
            for doc_id, text in corpus.items()
        ]
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _cmd_build_context(args: argparse.Namespace) -> int:
    config = _load_config(args)
    fraction = float(_resolve(args, config, "fraction", 0.30))
    docs = _load_retrieved_docs(args.docs)
    provider = None
    if args.vectors:
        vectors, rejected = read_vectors(args.vectors)
        for lineno, reason in rejected:
            logger.warning("%s:%d: rejected vector record: %s", args.vectors, lineno, reason)
        provider = ExternalVectors(vectors)
    built = build_context(args.query, docs, fraction=fraction, provider=provider)

    out = _out_dir(args)
    (out / "context.txt").write_text(built.text + "\n", encoding="utf-8")
    write_json(out / "context.json", {
        "query": built.query,
        "fraction": built.fraction,
        "sentences": [
            {
                "doc_id": s.doc_id,
                "sentence_index": s.sentence_index,
                "similarity": s.similarity,
                "text": s.text,
            }
            for s in built.sentences
        ],
    })
    _write_run_config(out, "build-context", {"fraction": fraction}, {
        "query": args.query,
        "docs": args.docs,
        "vectors": args.vectors,
    })
    sys.stdout.write(f"selected {len(built.sentences)} sentences\n")
    return 0


def _cmd_corrupt(args: argparse.Namespace) -> int:
    config = _load_config(args)
    seed = int(_resolve(args, config, "seed", 0))
    context = _annotated_from_file(args.context, args.annotations)
    try:
        table = json.loads(Path(args.table).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {args.table}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.table}: invalid JSON: {exc}") from exc
    if not isinstance(table, dict):
        raise InputError(f"{args.table}: expected a JSON object of replacements")
    corrupted = synthesize_corrupted_context(context, table, seed=seed)
    out = _out_dir(args)
    (out / "corrupted.txt").write_text(corrupted.raw_text, encoding="utf-8")
    _write_run_config(out, "corrupt", {"seed": seed}, {
        "context": args.context,
        "table": args.table,
        "annotations": args.annotations,
    })
    sys.stdout.write(f"replaced {len(table)} entities\n")
    return 0


def _load_prompt_groups(args: argparse.Namespace, cfg: EcdConfig):
    contexts = _load_corpus_docs(args.contexts, args.annotations)
    candidate_docs: dict[str, dict[str, AnnotatedDoc]] = {}
    for lineno, rec in read_jsonl(args.candidates):
        missing = {"prompt_id", "candidate_id", "text"} - rec.keys()
        if missing:
            raise InputError(
                f"{args.candidates}:{lineno}: candidate record lacks {sorted(missing)}"
            )
        prompt_id = str(rec["prompt_id"])
        candidate_id = str(rec["candidate_id"])
        if prompt_id not in contexts:
            raise InputError(
                f"{args.candidates}:{lineno}: prompt_id {prompt_id!r} not in contexts"
            )
        per_prompt = candidate_docs.setdefault(prompt_id, {})
        if candidate_id in per_prompt:
            raise InputError(
                f"{args.candidates}:{lineno}: duplicate candidate id {candidate_id!r}"
            )
        per_prompt[candidate_id] = AnnotatedDoc.from_text(
            str(rec["text"]), f"{prompt_id}/{candidate_id}"
        )
    if not candidate_docs:
        raise InputError(f"{args.candidates}: no candidate records")
    groups = {
        prompt_id: score_candidates(prompt_id, contexts[prompt_id], cands, cfg)
        for prompt_id, cands in sorted(candidate_docs.items())
    }
    return groups


def _cmd_pairs(args: argparse.Namespace) -> int:
    config = _load_config(args)
    cfg, params = _metric_config(args, config)
    min_gap = float(_resolve(args, config, "min_gap", 0.0))
    groups = _load_prompt_groups(args, cfg)
    pairs = build_pairs(list(groups.values()), min_gap=min_gap)
    out = _out_dir(args)
    export_pairs(pairs, out / "pairs.jsonl")
    _write_run_config(out, "pairs", {**params, "min_gap": min_gap}, {
        "contexts": args.contexts,
        "candidates": args.candidates,
        "annotations": args.annotations,
    })
    sys.stdout.write(f"mined {len(pairs)} pairs from {len(groups)} prompts\n")
    return 0


def _cmd_train_toy(args: argparse.Namespace) -> int:
    config = _load_config(args)
    cfg, params = _metric_config(args, config)
    min_gap = float(_resolve(args, config, "min_gap", 0.0))
    train_cfg = TrainConfig(
        gamma=float(_resolve(args, config, "gamma", 1.0)),
        learning_rate=float(_resolve(args, config, "lr", 0.1)),
        epochs=int(_resolve(args, config, "epochs", 1)),
        seed=int(_resolve(args, config, "seed", 0)),
    )
    groups = _load_prompt_groups(args, cfg)
    pairs = build_pairs(list(groups.values()), min_gap=min_gap)
    policy = ToyPolicy.initialize(seed=train_cfg.seed)
    trained, metrics = train_toy(policy, pairs, groups, train_cfg)

    out = _out_dir(args)
    export_pairs(pairs, out / "pairs.jsonl")
    write_epoch_metrics(metrics, out / "metrics.csv")
    write_json(out / "policy.json", {
        "feature_names": list(FEATURE_NAMES),
        "weights": [float(w) for w in trained.weights],
        "gamma": train_cfg.gamma,
        "learning_rate": train_cfg.learning_rate,
        "epochs": train_cfg.epochs,
        "seed": train_cfg.seed,
    })
    _write_run_config(
        out,
        "train-toy",
        {
            **params,
            "min_gap": min_gap,
            "gamma": train_cfg.gamma,
            "lr": train_cfg.learning_rate,
            "epochs": train_cfg.epochs,
            "seed": train_cfg.seed,
        },
        {
            "contexts": args.contexts,
            "candidates": args.candidates,
            "annotations": args.annotations,
        },
    )
    first, last = metrics[0], metrics[-1]
    sys.stdout.write(
        f"trained on {len(pairs)} pairs; loss {first.loss:.6f} -> {last.loss:.6f}, "
        f"argmax ECD {first.mean_argmax_ecd:.6f} -> {last.mean_argmax_ecd:.6f}\n"
    )
    return 0


def _cmd_alpha(args: argparse.Namespace) -> int:
    config = _load_config(args)
    min_tail = int(_resolve(args, config, "min_tail", 5))
    xmin = _resolve(args, config, "xmin", None)
    xmin = float(xmin) if xmin is not None else None
    layers = load_layer_manifest(args.layers)
    stats = weighted_alpha(layers, min_tail=min_tail, xmin=xmin)
    out = _out_dir(args)
    write_json(out / "stats.json", stats.to_dict())
    _write_run_config(out, "alpha", {"min_tail": min_tail, "xmin": xmin}, {
        "layers": args.layers,
    })
    sys.stdout.write(f"weighted alpha {stats.weighted_alpha:.6f} "
                     f"over {len(stats.per_layer)} layers\n")
    return 0


def _cmd_drift(args: argparse.Namespace) -> int:
    config = _load_config(args)
    min_tail = int(_resolve(args, config, "min_tail", 5))
    threshold = float(_resolve(args, config, "threshold", 0.1))
    before = weighted_alpha(load_layer_manifest(args.before), min_tail=min_tail)
    after = weighted_alpha(load_layer_manifest(args.after), min_tail=min_tail)
    report = compare_stats(before, after, threshold=threshold)
    out = _out_dir(args)
    write_json(out / "drift.json", report.to_dict())
    _write_run_config(out, "drift", {"min_tail": min_tail, "threshold": threshold}, {
        "before": args.before,
        "after": args.after,
    })
    verdict = "within" if report.passed else "beyond"
    sys.stdout.write(
        f"relative drift {report.relative_drift:.6f} {verdict} threshold {threshold}\n"
    )
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_metric_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, help="context window half-size (default 10)")
    p.add_argument("--sigma", type=float,
                   help="fixed sigma for the penalty terms (implies --sigma-mode fixed)")
    p.add_argument("--sigma-mode", choices=("computed", "fixed"), dest="sigma_mode",
                   help="how sigma is obtained (default computed)")
    p.add_argument("--zero-common", choices=("error", "sentinel"), dest="zero_common",
                   help="policy when documents share no entities (default error)")
    p.add_argument("--annotations", help="entity annotation JSONL (heuristic otherwise)")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file with flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecd-eval",
        description="Entity-context divergence scoring and RAG-ability diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one context/generation pair")
    p.add_argument("context", help="context text file")
    p.add_argument("generated", help="generated text file")
    _add_metric_flags(p)
    _add_common_flags(p)
    p.add_argument("--out", help="output directory (breakdown.json)")
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("batch-score", help="score every pair in a manifest")
    p.add_argument("--corpus", required=True, help="corpus JSONL with id and text")
    p.add_argument("--manifest", required=True, help="pairing manifest JSONL")
    _add_metric_flags(p)
    _add_common_flags(p)
    p.add_argument("--jobs", type=int, help="worker threads (default 1)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_batch_score)

    p = sub.add_parser("profile", help="density profile over a scored batch")
    p.add_argument("--corpus", required=True, help="corpus JSONL with id and text")
    p.add_argument("--manifest", required=True, help="pairing manifest JSONL")
    _add_metric_flags(p)
    _add_common_flags(p)
    p.add_argument("--jobs", type=int, help="worker threads (default 1)")
    p.add_argument("--grid-size", type=int, dest="grid_size",
                   help="density grid points (default 512)")
    p.add_argument("--bandwidth", type=float,
                   help="kernel bandwidth (default: Silverman's rule)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_profile)

    p = sub.add_parser("build-context", help="assemble a context from retrieved docs")
    p.add_argument("--query", required=True, help="query text")
    p.add_argument("--docs", required=True,
                   help="directory of .txt files or a corpus JSONL")
    p.add_argument("--fraction", type=float,
                   help="fraction of sentences to keep (default 0.30)")
    p.add_argument("--vectors", help="precomputed sentence vectors JSONL")
    _add_common_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_build_context)

    p = sub.add_parser("corrupt", help="swap entity mentions for replacements")
    p.add_argument("context", help="context text file")
    p.add_argument("--table", required=True,
                   help="JSON object: entity key to replacement or pool")
    p.add_argument("--annotations", help="entity annotation JSONL (heuristic otherwise)")
    p.add_argument("--seed", type=int, help="pool sampling seed (default 0)")
    _add_common_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_corrupt)

    p = sub.add_parser("pairs", help="mine preference pairs from scored candidates")
    p.add_argument("--contexts", required=True, help="context corpus JSONL")
    p.add_argument("--candidates", required=True,
                   help="candidate JSONL with prompt_id, candidate_id, text")
    _add_metric_flags(p)
    _add_common_flags(p)
    p.add_argument("--min-gap", type=float, dest="min_gap",
                   help="minimum ECD gap to keep a pair (default 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_pairs)

    p = sub.add_parser("train-toy", help="train the toy policy on mined pairs")
    p.add_argument("--contexts", required=True, help="context corpus JSONL")
    p.add_argument("--candidates", required=True,
                   help="candidate JSONL with prompt_id, candidate_id, text")
    _add_metric_flags(p)
    _add_common_flags(p)
    p.add_argument("--min-gap", type=float, dest="min_gap",
                   help="minimum ECD gap to keep a pair (default 0)")
    p.add_argument("--gamma", type=float, help="ECD gap weight (default 1.0)")
    p.add_argument("--lr", type=float, help="learning rate (default 0.1)")
    p.add_argument("--epochs", type=int, help="training epochs (default 1)")
    p.add_argument("--seed", type=int, help="weight init seed (default 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_train_toy)

    p = sub.add_parser("alpha", help="weighted power-law exponent of weight spectra")
    p.add_argument("--layers", required=True, help="layer manifest JSON")
    p.add_argument("--min-tail", type=int, dest="min_tail",
                   help="minimum tail points per fit (default 5)")
    p.add_argument("--xmin", type=float, help="fixed tail cutoff (default: KS search)")
    _add_common_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_alpha)

    p = sub.add_parser("drift", help="compare weighted alpha across two checkpoints")
    p.add_argument("--before", required=True, help="layer manifest JSON")
    p.add_argument("--after", required=True, help="layer manifest JSON")
    p.add_argument("--min-tail", type=int, dest="min_tail",
                   help="minimum tail points per fit (default 5)")
    p.add_argument("--threshold", type=float,
                   help="relative drift pass threshold (default 0.1)")
    _add_common_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_drift)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.handler(args))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegenerateSampleError as exc:
        print(f"error: degenerate sample: {exc}", file=sys.stderr)
        return 4
    except NoCommonEntitiesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
