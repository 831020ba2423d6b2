"""File-staged experiment pipeline.

Each subcommand reads its declared input artifacts and writes its
declared outputs, so the expensive corpus stages run once and every
stage can be rerun in isolation.  Stages are deterministic given
identical inputs and seeds; a manifest in the output directory records
seeds, versions and content digests of everything written.

Exit codes: 0 success, 2 validation or invariant failure, 1 other
errors.
"""

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__, baselines, corpus, evaluation, factorizer, labeler, splitter, synth

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2


class StageInputError(RuntimeError):
    """A prerequisite artifact is missing; the message names the stage to run."""


class ValidationError(RuntimeError):
    """An artifact or invariant check failed."""


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest_key(path, out_dir):
    """Keep manifests relocatable: paths under out_dir are stored relative."""
    try:
        return str(Path(path).resolve().relative_to(Path(out_dir).resolve()))
    except ValueError:
        return str(path)


def _update_manifest(out_dir, stage, inputs, outputs, seed=None, extra=None):
    manifest_path = Path(out_dir) / "manifest.json"
    manifest = {"package": "toxpred", "version": __version__, "stages": {}}
    if manifest_path.exists():
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        manifest["version"] = __version__
    entry = {
        "inputs": {_manifest_key(p, out_dir): _sha256(p) for p in inputs},
        "outputs": {_manifest_key(p, out_dir): _sha256(p) for p in outputs},
    }
    if seed is not None:
        entry["seed"] = seed
    if extra:
        entry.update(extra)
    manifest.setdefault("stages", {})[stage] = entry
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(path, producer):
    if not Path(path).exists():
        raise StageInputError(f"missing {Path(path).name}: run the {producer} stage first")
    return path


def _write_json(payload, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config_file(path):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _resolve(args, config, stage, name, default):
    """CLI flag > config-file entry > built-in default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(stage, {}).get(name, default)


def _load_dataset(interactions_path):
    records = labeler.read_interactions_csv(interactions_path)
    return labeler.index_dataset(records), records


def _load_split(dataset, split_path):
    return splitter.read_split_csv(dataset, split_path)


# ---------------------------------------------------------------- stages


def _stage_synth(args, config):
    spec = synth.SynthSpec(
        n_users=_resolve(args, config, "synth", "users", 2000),
        m_subs=_resolve(args, config, "synth", "subs", 100),
        d_true=_resolve(args, config, "synth", "d_true", 2),
        toxic_rate_target=_resolve(args, config, "synth", "toxic_rate", 0.10),
        density=_resolve(args, config, "synth", "density", 0.0677),
        noise_flip_prob=_resolve(args, config, "synth", "noise", 0.05),
        comments_min=_resolve(args, config, "synth", "comments_min", 1),
        comments_max=_resolve(args, config, "synth", "comments_max", 6),
        seed=args.seed,
    )
    try:
        comments, truth = synth.generate(spec)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    out = Path(args.out or Path(args.out_dir) / "comments.jsonl")
    truth_path = Path(args.truth or Path(args.out_dir) / "ground_truth.json")
    corpus.write_comments_jsonl(comments, out)
    _write_json(truth, truth_path)
    print(f"synth: {len(comments)} comments over {len(truth['pairs'])} interactions -> {out}")
    _update_manifest(args.out_dir, "synth", [], [out, truth_path], seed=spec.seed,
                     extra={"spec": asdict(spec)})
    return EXIT_OK


def _stage_filter(args, config):
    _require(args.infile, "synth (or provide a scored comment dump)")
    keywords = corpus.DEFAULT_HEALTH_KEYWORDS
    keywords_file = _resolve(args, config, "filter", "keywords", None)
    if keywords_file:
        with open(keywords_file, encoding="utf-8") as fh:
            keywords = frozenset(
                line.strip().lower() for line in fh if line.strip())
    cfg = corpus.KeywordConfig(
        health_keywords=keywords,
        popular_k=_resolve(args, config, "filter", "popular_k", 100),
        min_distinct_users=_resolve(args, config, "filter", "min_users", 20),
    )
    try:
        comments = corpus.read_comments(args.infile, strict=args.strict)
    except corpus.CommentParseError as exc:
        raise ValidationError(f"{args.infile}: {exc}") from exc
    kept, stats = corpus.filter_corpus(comments, cfg)
    out = Path(args.out or Path(args.out_dir) / "filtered.jsonl")
    corpus.write_comments_jsonl(kept, out)
    print("filter: " + ", ".join(f"{k}={v}" for k, v in stats.items()))
    _update_manifest(args.out_dir, "filter", [args.infile], [out], extra={"stats": stats})
    return EXIT_OK


def _stage_aggregate(args, config):
    _require(args.infile, "filter")
    try:
        comments = corpus.read_comments(args.infile, strict=args.strict)
        interactions = labeler.aggregate_interactions(comments)
    except (corpus.CommentParseError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc
    dataset = labeler.index_dataset(interactions)
    out = Path(args.out or Path(args.out_dir) / "interactions.csv")
    index_path = Path(args.index or Path(args.out_dir) / "index.json")
    labeler.write_interactions_csv(interactions, out)
    labeler.write_index_json(dataset, index_path)
    toxic = sum(it.label for it in dataset.interactions)
    print(f"aggregate: {len(interactions)} interactions "
          f"({toxic} toxic) over {dataset.n_users} users x "
          f"{dataset.n_subreddits} subreddits -> {out}")
    _update_manifest(args.out_dir, "aggregate", [args.infile], [out, index_path])
    return EXIT_OK


def _stage_split(args, config):
    _require(args.interactions, "aggregate")
    dataset, _ = _load_dataset(args.interactions)
    split = splitter.loli_binary_split(
        dataset, seed=args.seed, with_validation=not args.no_validation)
    violations = splitter.verify_split(dataset, split)
    if violations:
        raise ValidationError("split verification failed:\n  " + "\n  ".join(violations))
    out = Path(args.out or Path(args.out_dir) / "split.csv")
    splitter.write_split_csv(dataset, split, out)
    sizes = {tag: split.assignment.count(tag) for tag in splitter.TAGS}
    print(f"split: {sizes} -> {out}")
    _update_manifest(args.out_dir, "split", [args.interactions], [out], seed=args.seed)
    return EXIT_OK


def _train_config_from_args(args, config, stage):
    return factorizer.TrainConfig(
        d=_resolve(args, config, stage, "d", 16),
        learning_rate=_resolve(args, config, stage, "lr", 1e-3),
        l2_lambda=_resolve(args, config, stage, "l2", 1e-4),
        batch_size=_resolve(args, config, stage, "batch_size", 256),
        max_epochs=_resolve(args, config, stage, "max_epochs", 1000),
        es_tolerance=_resolve(args, config, stage, "tolerance", 0.005),
        es_patience=_resolve(args, config, stage, "patience", 7),
        seed=args.seed,
    )


def _stage_train(args, config):
    _require(args.interactions, "aggregate")
    _require(args.split, "split")
    dataset, _ = _load_dataset(args.interactions)
    split = _load_split(dataset, args.split)
    parts = splitter.partition_triples(dataset, split)
    train_config = _train_config_from_args(args, config, "train")
    params, report = factorizer.fit(
        parts[splitter.TRAIN], parts[splitter.VALIDATION],
        dataset.n_users, dataset.n_subreddits, train_config)
    out = Path(args.out or Path(args.out_dir) / "model.npz")
    report_path = Path(args.report or Path(args.out_dir) / "train_report.json")
    factorizer.save_checkpoint(out, params, train_config)
    _write_json({
        "config": asdict(train_config),
        "train_losses": report.train_losses,
        "val_losses": report.val_losses,
        "val_gmeans": report.val_gmeans,
        "best_epoch": report.best_epoch,
        "epochs_run": report.epochs_run,
        "stopped_early": report.stopped_early,
    }, report_path)
    last_gmean = report.val_gmeans[-1] if report.val_gmeans else None
    print(f"train: {report.epochs_run} epochs "
          f"(best {report.best_epoch}, stopped_early={report.stopped_early}, "
          f"val gmean {last_gmean}) -> {out}")
    _update_manifest(args.out_dir, "train", [args.interactions, args.split],
                     [out, report_path], seed=args.seed)
    return EXIT_OK


def _stage_grid(args, config):
    _require(args.interactions, "aggregate")
    _require(args.split, "split")
    dataset, _ = _load_dataset(args.interactions)
    split = _load_split(dataset, args.split)
    parts = splitter.partition_triples(dataset, split)
    grid = {
        "d": _resolve(args, config, "grid", "grid_d", factorizer.DEFAULT_GRID["d"]),
        "learning_rate": _resolve(args, config, "grid", "grid_lr",
                                  factorizer.DEFAULT_GRID["learning_rate"]),
        "l2_lambda": _resolve(args, config, "grid", "grid_l2",
                              factorizer.DEFAULT_GRID["l2_lambda"]),
        "batch_size": _resolve(args, config, "grid", "grid_batch",
                               factorizer.DEFAULT_GRID["batch_size"]),
    }
    base = _train_config_from_args(args, config, "grid")
    best_config, best_params, cells = factorizer.grid_search(
        parts[splitter.TRAIN], parts[splitter.VALIDATION],
        dataset.n_users, dataset.n_subreddits, grid=grid, base=base)
    out = Path(args.out or Path(args.out_dir) / "model.npz")
    report_path = Path(args.report or Path(args.out_dir) / "grid_report.json")
    factorizer.save_checkpoint(out, best_params, best_config)
    _write_json({"best_config": asdict(best_config), "cells": cells}, report_path)
    print(f"grid: {len(cells)} cells, best d={best_config.d} "
          f"lr={best_config.learning_rate} l2={best_config.l2_lambda} "
          f"batch={best_config.batch_size} -> {out}")
    _update_manifest(args.out_dir, "grid", [args.interactions, args.split],
                     [out, report_path], seed=args.seed)
    return EXIT_OK


def _model_eval(dataset, parts, params, all_metrics=False):
    test = parts[splitter.TEST]
    if not test:
        raise ValidationError("test partition is empty; rerun the split stage")
    u_idx = [u for u, _, _ in test]
    s_idx = [s for _, s, _ in test]
    y_true = [label for _, _, label in test]
    probs = factorizer.predict_batch(params, u_idx, s_idx)
    y_pred = (probs > 0.5).astype(int)
    cm = evaluation.confusion(y_true, y_pred)
    report = evaluation.metrics(cm)
    payload = {
        "model": "MDL",
        "confusion": asdict(cm),
        **evaluation.report_to_dict(report),
    }
    if all_metrics:
        payload["diagnostics"] = {
            "accuracy": evaluation.accuracy(cm),
            "f1": evaluation.f1_score(cm),
            "auc_roc": evaluation.auc_from_scores(y_true, probs),
        }
    return payload


def _stage_evaluate(args, config):
    _require(args.interactions, "aggregate")
    _require(args.split, "split")
    if not Path(args.model).exists():
        raise StageInputError("missing model checkpoint: run the train stage first")
    dataset, _ = _load_dataset(args.interactions)
    split = _load_split(dataset, args.split)
    parts = splitter.partition_triples(dataset, split)
    params, _ = factorizer.load_checkpoint(args.model)
    if params.U.shape[0] != dataset.n_users or params.V.shape[0] != dataset.n_subreddits:
        raise ValidationError(
            f"checkpoint shape ({params.U.shape[0]} users, {params.V.shape[0]} subs) "
            f"does not match the dataset ({dataset.n_users}, {dataset.n_subreddits})")
    payload = _model_eval(dataset, parts, params, all_metrics=args.all_metrics)
    out = Path(args.out or Path(args.out_dir) / "eval.json")
    _write_json(payload, out)
    print(f"evaluate: sensitivity {payload['sensitivity']:.3f}, "
          f"specificity {payload['specificity']:.3f}, "
          f"gmean {payload['gmean']:.3f} -> {out}")
    _update_manifest(args.out_dir, "evaluate",
                     [args.interactions, args.split, args.model], [out])
    return EXIT_OK


def _baseline_reports(parts, n_runs, base_seed):
    train = parts[splitter.TRAIN]
    test = parts[splitter.TEST]
    y_true = [label for _, _, label in test]
    p_toxic = baselines.toxic_fraction(train)
    profile = baselines.build_user_profile(train)

    def run_non(seed):
        return evaluation.metrics(evaluation.confusion(y_true, baselines.predict_non(test)))

    def run_rnd(seed):
        return evaluation.metrics(
            evaluation.confusion(y_true, baselines.predict_rnd(test, p_toxic, seed)))

    def run_usr(seed):
        return evaluation.metrics(
            evaluation.confusion(y_true, baselines.predict_usr(test, profile, seed)))

    return {
        "NON": evaluation.multi_run(run_non, n_runs, base_seed),
        "RND": evaluation.multi_run(run_rnd, n_runs, base_seed),
        "USR": evaluation.multi_run(run_usr, n_runs, base_seed),
    }


def _stage_report(args, config):
    _require(args.interactions, "aggregate")
    _require(args.split, "split")
    _require(args.model_eval, "evaluate")
    dataset, records = _load_dataset(args.interactions)
    split = _load_split(dataset, args.split)
    parts = splitter.partition_triples(dataset, split)
    with open(args.model_eval, encoding="utf-8") as fh:
        mdl = json.load(fh)

    n_runs = _resolve(args, config, "report", "runs", 5)
    reports = _baseline_reports(parts, n_runs, args.seed)
    rows = [(name, reports[name]) for name in ("NON", "RND", "USR")]
    mdl_report = evaluation.EvalReport(
        sensitivity=mdl["sensitivity"], specificity=mdl["specificity"],
        gmean=mdl["gmean"],
        sensitivity_std=mdl.get("sensitivity_std", 0.0),
        specificity_std=mdl.get("specificity_std", 0.0),
        gmean_std=mdl.get("gmean_std", 0.0),
        n_runs=mdl.get("n_runs", 1))
    rows.append(("MDL", mdl_report))

    payload = {
        "runs": n_runs,
        "base_seed": args.seed,
        "models": {name: evaluation.report_to_dict(rep) for name, rep in rows},
    }
    outputs = []
    if args.histogram:
        counts = evaluation.toxicity_histogram(
            [rec.mean_toxicity for rec in records], n_bins=args.bins)
        evaluation.render_histogram(counts, args.histogram)
        payload["histogram"] = {"bins": args.bins, "counts": counts.tolist()}
        outputs.append(Path(args.histogram))

    out = Path(args.out or Path(args.out_dir) / "report.json")
    table_path = Path(args.table or Path(args.out_dir) / "report.txt")
    _write_json(payload, out)
    table = evaluation.format_report_table(rows)
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    print(table)
    _update_manifest(args.out_dir, "report",
                     [args.interactions, args.split, args.model_eval],
                     [out, table_path, *outputs], seed=args.seed)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="toxpred",
        description="Predict the toxicity of future user-subcommunity interactions.")
    parser.add_argument("--out-dir", default=".", help="directory for stage artifacts")
    parser.add_argument("--config", help="JSON config file with per-stage defaults")
    parser.add_argument("--seed", type=int, default=0, help="stage seed")
    sub = parser.add_subparsers(dest="stage", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scored comment corpus")
    p.add_argument("--users", type=int)
    p.add_argument("--subs", type=int)
    p.add_argument("--d-true", type=int, dest="d_true")
    p.add_argument("--toxic-rate", type=float, dest="toxic_rate")
    p.add_argument("--density", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--comments-min", type=int, dest="comments_min")
    p.add_argument("--comments-max", type=int, dest="comments_max")
    p.add_argument("--out", help="comments JSONL path")
    p.add_argument("--truth", help="ground truth JSON path")

    p = sub.add_parser("filter", help="low-activity and generic-comment filtering")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.add_argument("--min-users", type=int, dest="min_users")
    p.add_argument("--popular-k", type=int, dest="popular_k")
    p.add_argument("--keywords", help="file with one health keyword per line")
    p.add_argument("--strict", action="store_true",
                   help="fail on the first malformed input line")

    p = sub.add_parser("aggregate", help="build labeled user-subreddit interactions")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="interactions CSV path")
    p.add_argument("--index", help="index sidecar JSON path")
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("split", help="train/validation/test partitioning")
    p.add_argument("--interactions", required=True)
    p.add_argument("--out", help="split CSV path")
    p.add_argument("--no-validation", action="store_true")

    for name, help_text in (("train", "train one matrix-factorization model"),
                            ("grid", "hyperparameter grid search")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--interactions", required=True)
        p.add_argument("--split", required=True)
        p.add_argument("--out", help="model checkpoint path")
        p.add_argument("--report", help="training report JSON path")
        p.add_argument("--max-epochs", type=int, dest="max_epochs")
        p.add_argument("--patience", type=int)
        p.add_argument("--tolerance", type=float)
        if name == "train":
            p.add_argument("--d", type=int)
            p.add_argument("--lr", type=float)
            p.add_argument("--l2", type=float)
            p.add_argument("--batch-size", type=int, dest="batch_size")
        else:
            p.add_argument("--grid-d", type=int, nargs="+", dest="grid_d")
            p.add_argument("--grid-lr", type=float, nargs="+", dest="grid_lr")
            p.add_argument("--grid-l2", type=float, nargs="+", dest="grid_l2")
            p.add_argument("--grid-batch", type=int, nargs="+", dest="grid_batch")

    p = sub.add_parser("evaluate", help="score the trained model on the test split")
    p.add_argument("--interactions", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="evaluation JSON path")
    p.add_argument("--all-metrics", action="store_true", dest="all_metrics",
                   help="also emit accuracy, F1 and AUC-ROC diagnostics")

    p = sub.add_parser("report", help="model-vs-baselines comparison table")
    p.add_argument("--interactions", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--model-eval", required=True, dest="model_eval",
                   help="evaluation JSON from the evaluate stage")
    p.add_argument("--runs", type=int)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--table", help="aligned text table path")
    p.add_argument("--histogram", help="emit the mean-toxicity histogram to this SVG")
    p.add_argument("--bins", type=int, default=evaluation.DEFAULT_HISTOGRAM_BINS)

    return parser


_HANDLERS = {
    "synth": _stage_synth,
    "filter": _stage_filter,
    "aggregate": _stage_aggregate,
    "split": _stage_split,
    "train": _stage_train,
    "grid": _stage_grid,
    "evaluate": _stage_evaluate,
    "report": _stage_report,
}


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    config = _load_config_file(args.config)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    try:
        return _HANDLERS[args.stage](args, config)
    except StageInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
