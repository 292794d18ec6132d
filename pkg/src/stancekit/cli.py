"""Batch command-line front door wiring all modules into experiments.

Stages are file-based so expensive steps are resumable and individually
testable: fitted resources and feature caches feed model bundles, bundles
feed prediction files, prediction files feed the scorer. Every command
writes a provenance record next to its output and exits nonzero with a
one-line diagnostic on error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, gbdt, pipeline, plots, resources_io, scoring, topics
from .corpus import load_dataset, load_stances, write_dataset_tsv
from .features import (DEFAULT_REFUTE_WORDS, FeatureResources,
                       FileAnnotationProvider, LexiconSentimentProvider,
                       SentenceScoreTable, extract_features, load_refute_words,
                       read_feature_cache, refute_stems_for, write_feature_cache)
from .pipeline import LdaSettings, ResourceSpec, StagePlan, OversampleSpec
from .simil import EmbeddingTable, load_embeddings
from .textproc import PreprocessConfig, default_stopwords, load_stopwords, preprocess


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _default_jobs() -> int:
    return max(1, os.cpu_count() or 1)


def _write_run_json(args: argparse.Namespace, out_path: Path) -> None:
    record = {
        "command": args.command,
        "package_version": __version__,
        "args": {k: v for k, v in sorted(vars(args).items())
                 if k not in ("func", "command")},
    }
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(record, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")


def _preprocess_config(args: argparse.Namespace) -> PreprocessConfig:
    stopwords = (load_stopwords(args.stopwords) if args.stopwords
                 else default_stopwords())
    return PreprocessConfig(stopwords=stopwords, stem=not args.no_stem,
                            ngram_n=args.ngram_n)


def _add_preprocess_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--stopwords", help="stopword list file (default: packaged list)")
    parser.add_argument("--ngram-n", type=int, default=2,
                        help="n for the n-gram overlap features (default 2)")
    parser.add_argument("--no-stem", action="store_true",
                        help="disable suffix stripping")


def _add_resource_options(parser: argparse.ArgumentParser) -> None:
    _add_preprocess_options(parser)
    parser.add_argument("--embeddings",
                        help="pretrained embedding text file (optional)")
    parser.add_argument("--lexicon",
                        help="sentiment lexicon TSV (default: packaged lexicon)")
    parser.add_argument("--refute-words",
                        help="refutation word list file (default: built-in list)")
    parser.add_argument("--wmd-cap", type=float, default=10.0,
                        help="WMD value for uncovered pairs (default 10)")
    parser.add_argument("--lda-model",
                        help="pretrained topic model JSON (default: train on bodies)")
    parser.add_argument("--lda-topics", type=int, default=100)
    parser.add_argument("--lda-alpha", type=float, default=None,
                        help="document-topic prior (default 50/topics)")
    parser.add_argument("--lda-beta", type=float, default=0.01)
    parser.add_argument("--lda-iters", type=int, default=500,
                        help="topic model training sweeps (default 500)")
    parser.add_argument("--lda-infer-iters", type=int, default=50,
                        help="topic inference sweeps per document (default 50)")


def _add_sidecar_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--annotations",
                        help="subject/object annotation sidecar TSV")
    parser.add_argument("--sentence-scores",
                        help="per-sentence sentiment score sidecar TSV")


def _add_train_param_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rounds", type=int, default=1000,
                        help="boosting rounds (default 1000)")
    parser.add_argument("--learning-rate", type=float, default=0.1)
    parser.add_argument("--max-depth", type=int, default=6)
    parser.add_argument("--l2-lambda", type=float, default=1.0)
    parser.add_argument("--min-gain", type=float, default=0.0)
    parser.add_argument("--min-child-weight", type=float, default=1.0)
    parser.add_argument("--subsample", type=float, default=1.0)
    parser.add_argument("--colsample", type=float, default=1.0)


def _train_params(args: argparse.Namespace) -> gbdt.TrainParams:
    return gbdt.TrainParams(
        n_rounds=args.rounds,
        learning_rate=args.learning_rate,
        max_depth=args.max_depth,
        lambda_l2=args.l2_lambda,
        gamma_min_gain=args.min_gain,
        min_child_weight=args.min_child_weight,
        subsample=args.subsample,
        colsample=args.colsample,
        seed=args.seed,
    )


def _load_sidecars(args: argparse.Namespace, cfg: PreprocessConfig):
    annotations = (FileAnnotationProvider.from_tsv(args.annotations, cfg)
                   if args.annotations else None)
    sentence_scores = (SentenceScoreTable.from_tsv(args.sentence_scores)
                       if args.sentence_scores else None)
    return annotations, sentence_scores


def _resource_spec(args: argparse.Namespace, cfg: PreprocessConfig) -> ResourceSpec:
    embeddings = (load_embeddings(args.embeddings) if args.embeddings
                  else EmbeddingTable.empty())
    sentiment = (LexiconSentimentProvider.from_tsv(args.lexicon, cfg)
                 if args.lexicon else LexiconSentimentProvider.default(cfg))
    refute = (refute_stems_for(load_refute_words(args.refute_words), cfg)
              if args.refute_words else refute_stems_for(DEFAULT_REFUTE_WORDS, cfg))
    annotations, sentence_scores = _load_sidecars(args, cfg)
    return ResourceSpec(
        cfg=cfg,
        embeddings=embeddings,
        sentiment=sentiment,
        lda=LdaSettings(
            n_topics=args.lda_topics,
            alpha=args.lda_alpha,
            beta=args.lda_beta,
            train_iters=args.lda_iters,
            infer_iters=args.lda_infer_iters,
        ),
        annotations=annotations,
        sentence_scores=sentence_scores,
        refute_stems=refute,
        wmd_cap=args.wmd_cap,
        seed=args.seed,
    )


def _cache_meta_path(cache_path: str | Path) -> Path:
    return Path(str(cache_path) + ".meta.json")


def _write_cache_meta(cache_path: Path, res: FeatureResources, stats,
                      split: str) -> None:
    meta = {
        "fingerprint": res.fingerprint(),
        "split": split,
        "rows": stats.pairs,
        "annotation_hits": stats.annotation_hits,
        "sidecar_sentiment_hits": stats.sidecar_sentiment_hits,
        "inactive_features": stats.inactive_features(res),
    }
    with open(_cache_meta_path(cache_path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _read_cache_meta(cache_path: str | Path) -> dict:
    meta_path = _cache_meta_path(cache_path)
    if not meta_path.exists():
        raise FileNotFoundError(
            f"{meta_path}: feature cache metadata missing; regenerate the cache"
        )
    with open(meta_path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_stances_any(path: str | Path):
    try:
        return load_stances(path, labeled=True)
    except ValueError:
        return load_stances(path, labeled=False)


# --------------------------------------------------------------------------
# subcommands


def _cmd_lda_train(args: argparse.Namespace) -> int:
    cfg = _preprocess_config(args)
    if args.corpus == "fnc-bodies":
        if not args.bodies:
            raise ValueError("--corpus fnc-bodies requires --bodies")
        from .corpus import load_bodies
        bodies = load_bodies(args.bodies)
        docs = [preprocess(body.text, cfg).tokens
                for _, body in sorted(bodies.items())]
    else:
        with open(args.corpus, encoding="utf-8") as fh:
            docs = [preprocess(line, cfg).tokens for line in fh if line.strip()]
    docs = [d for d in docs if d]
    alpha = args.alpha if args.alpha is not None else 50.0 / args.topics
    _log(f"training {args.topics}-topic model on {len(docs)} documents")
    model = topics.lda_train(docs, args.topics, alpha, args.beta, args.iters,
                             args.seed)
    topics.save_lda(model, args.out)
    _write_run_json(args, Path(str(args.out) + ".run.json"))
    _log(f"wrote {args.out}")
    return 0


def _cmd_features(args: argparse.Namespace) -> int:
    ds = load_dataset(args.bodies, args.stances, labeled=not args.unlabeled)
    if args.dump_dataset:
        write_dataset_tsv(ds, args.dump_dataset)
    if args.train:
        cfg = _preprocess_config(args)
        spec = _resource_spec(args, cfg)
        lda_model = topics.load_lda(args.lda_model) if args.lda_model else None
        _log(f"fitting resources on {len(ds)} training pairs")
        res = pipeline.fit_resources(ds, spec, lda_model=lda_model)
        resources_io.save_resources(args.resources, res,
                                    embeddings_path=args.embeddings)
        split = "train"
    else:
        res = resources_io.load_resources(
            args.resources, embeddings_override=args.embeddings)
        res.annotations, res.sentence_scores = _load_sidecars(args, res.cfg)
        split = "test"
    _log(f"extracting features for {len(ds)} pairs (jobs={args.jobs})")
    rows, stats = extract_features(ds, res, jobs=args.jobs)
    write_feature_cache(rows, args.out)
    _write_cache_meta(Path(args.out), res, stats, split)
    inactive = stats.inactive_features(res)
    if inactive:
        _log(f"inactive features (no provider data): {', '.join(inactive)}")
    _write_run_json(args, Path(str(args.out) + ".run.json"))
    _log(f"wrote {args.out} ({stats.pairs} rows)")
    return 0


def _parse_feature_mask(value: str | None) -> tuple[str, ...] | None:
    if value is None:
        return None
    return tuple(name.strip() for name in value.split(",") if name.strip())


def _cmd_train(args: argparse.Namespace) -> int:
    rows = read_feature_cache(args.features)
    meta = _read_cache_meta(args.features)
    params = _train_params(args)
    oversample = OversampleSpec() if args.oversample_disagree else None
    plan = StagePlan(variant=args.plan, stage1=params, stage2=params,
                     oversample=oversample,
                     stage1_features=_parse_feature_mask(args.stage1_features),
                     stage2_features=_parse_feature_mask(args.stage2_features))
    _log(f"training {args.plan} pipeline on {len(rows)} rows "
         f"({params.n_rounds} rounds)")
    tp = pipeline.train_from_features(plan, rows, meta["fingerprint"])
    out = Path(args.out)
    pipeline.save_bundle(tp, out, resources_dir=args.resources)
    losses = {"stage1": tp.stage1.train_losses}
    if tp.stage2 is not None:
        losses["stage2"] = tp.stage2.train_losses
    plots.loss_curve_figure(losses, out / "training_loss.png")
    _write_run_json(args, out / "run.json")
    _log(f"wrote bundle {out}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    tp = pipeline.load_bundle(args.bundle)
    rows = read_feature_cache(args.features)
    meta = _read_cache_meta(args.features)
    if meta["fingerprint"] != tp.fingerprint:
        raise ValueError(
            "feature cache fingerprint does not match the trained pipeline; "
            "re-extract features with the bundle's resources"
        )
    instances = _load_stances_any(args.stances)
    if len(instances) != len(rows):
        raise ValueError(
            f"stances file has {len(instances)} rows, cache has {len(rows)}"
        )
    for i, (pair_id, _, _) in enumerate(rows):
        if pair_id != i:
            raise ValueError(
                f"cache row {i} carries pair_id {pair_id}; expected the "
                "cache to follow stances-file order"
            )
    predictions = pipeline.predict_from_features(tp, rows, meta["fingerprint"])
    scoring.write_predictions(instances, predictions, args.out)
    _write_run_json(args, Path(str(args.out) + ".run.json"))
    _log(f"wrote {args.out} ({len(predictions)} predictions)")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    report = scoring.score_files(args.truth, args.pred)
    rendered = scoring.render_report(report, fmt=args.format)
    sys.stdout.write(rendered)
    if args.out:
        out = Path(args.out)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(rendered)
        fig_path = out.with_name(out.stem + "_confusion.png")
        plots.confusion_figure(report.confusion, report.relative, fig_path)
        _write_run_json(args, Path(str(out) + ".run.json"))
        _log(f"wrote {out} and {fig_path}")
    return 0


def _cmd_gridsearch(args: argparse.Namespace) -> int:
    with open(args.grid, encoding="utf-8") as fh:
        grid = json.load(fh)
    if not isinstance(grid, dict) or not grid:
        raise ValueError(f"{args.grid}: grid must be a non-empty JSON object")
    ds = load_dataset(args.bodies, args.stances, labeled=True)
    cfg = _preprocess_config(args)
    spec = _resource_spec(args, cfg)
    params = _train_params(args)
    oversample = OversampleSpec() if args.oversample_disagree else None
    template = StagePlan(variant=args.plan, stage1=params, stage2=params,
                         oversample=oversample)
    _log(f"grid search over {args.grid} with {args.folds} folds")
    best_plan, results = pipeline.grid_search(
        template, grid, ds, k=args.folds, seed=args.seed, spec=spec,
        jobs=args.jobs,
    )

    names = list(grid)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fold_cols = [f"fold_{i}" for i in range(args.folds)]
        fh.write("\t".join(names + ["mean_relative"] + fold_cols) + "\n")
        for r in results:
            cells = [str(r.overrides[n]) for n in names]
            cells.append(format(r.mean_relative, ".9g"))
            cells.extend(format(v, ".9g") for v in r.fold_scores)
            fh.write("\t".join(cells) + "\n")

    labels = ["\n".join(f"{n}={r.overrides[n]}" for n in names) for r in results]
    plots.grid_scores_figure(labels, [r.mean_relative for r in results],
                             out.with_name(out.stem + "_scores.png"))
    best_path = out.with_name(out.stem + "_best_plan.json")
    with open(best_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(best_plan.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_run_json(args, Path(str(out) + ".run.json"))
    _log(f"wrote {out}, best plan in {best_path}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stancekit",
        description="Stance detection experiments on headline/body pairs",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lda-train", help="train the topic model")
    p.add_argument("--corpus", required=True,
                   help="plain-text corpus file (one document per line) "
                        "or 'fnc-bodies'")
    p.add_argument("--bodies", help="bodies CSV when --corpus fnc-bodies")
    p.add_argument("--topics", type=int, default=100)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output model JSON")
    _add_preprocess_options(p)
    p.set_defaults(func=_cmd_lda_train)

    p = sub.add_parser("features", help="extract the 20-feature vectors")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--train", action="store_true",
                      help="fit resources on this dataset, then extract")
    mode.add_argument("--test", action="store_true",
                      help="extract with previously fitted resources")
    p.add_argument("--bodies", required=True)
    p.add_argument("--stances", required=True)
    p.add_argument("--resources", required=True,
                   help="resources directory (written with --train)")
    p.add_argument("--out", required=True, help="output feature cache TSV")
    p.add_argument("--unlabeled", action="store_true",
                   help="stances file has no Stance column")
    p.add_argument("--dump-dataset", help="also write a normalized pair TSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    _add_resource_options(p)
    _add_sidecar_options(p)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train a classification pipeline")
    p.add_argument("--plan", choices=[pipeline.ONE_STAGE, pipeline.TWO_STAGE],
                   required=True)
    p.add_argument("--features", required=True, help="training feature cache")
    p.add_argument("--resources", required=True, help="fitted resources directory")
    p.add_argument("--oversample-disagree", action="store_true",
                   help="duplicate disagree rows up to the agree count")
    p.add_argument("--stage1-features",
                   help="comma-separated feature subset for stage 1 (default: all)")
    p.add_argument("--stage2-features",
                   help="comma-separated feature subset for stage 2 (default: all)")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--seed", type=int, default=0)
    _add_train_param_options(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict stances with a trained bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--features", required=True, help="feature cache to predict")
    p.add_argument("--stances", required=True,
                   help="stances CSV the cache was extracted from")
    p.add_argument("--out", required=True, help="output predictions CSV")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("score", help="score predictions with the weighted metric")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--format", choices=["text", "json", "tsv"], default="text")
    p.add_argument("--out", help="also write the report (plus a confusion figure)")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("gridsearch", help="cross-validated parameter search")
    p.add_argument("--grid", required=True, help="JSON file: {param: [values]}")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--bodies", required=True)
    p.add_argument("--stances", required=True)
    p.add_argument("--plan", choices=[pipeline.ONE_STAGE, pipeline.TWO_STAGE],
                   default=pipeline.TWO_STAGE)
    p.add_argument("--oversample-disagree", action="store_true")
    p.add_argument("--out", required=True, help="output report TSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    _add_resource_options(p)
    _add_sidecar_options(p)
    _add_train_param_options(p)
    p.set_defaults(func=_cmd_gridsearch)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError, OSError) as exc:
        print(f"stancekit {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
