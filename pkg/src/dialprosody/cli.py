"""Command-line driver.

Exit codes: 0 success, 1 usage error, 2 data error (bad or unreadable
inputs), 3 split-constraint failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import analysis, metric, midlevel, models, pipeline
from .corpus import load_manifest
from .errors import DataError, SplitConstraintError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONSTRAINT = 3


def _utterance_language(utterance_id: str) -> str:
    return utterance_id.split("_", 1)[0]


def cmd_extract(args) -> int:
    manifest = load_manifest(args.manifest, strict=not args.lenient)
    vectors, _ = pipeline.extract_features(
        manifest, args.audio_root, jobs=args.jobs, dump_dir=args.dump_frames
    )
    midlevel.write_features_csv(vectors, args.out)
    print(f"wrote {len(vectors)} feature vectors to {args.out}")
    return EXIT_OK


def cmd_distance(args) -> int:
    vectors = midlevel.read_features_csv(args.features)
    by_id = {v.utterance_id: v for v in vectors}
    for uid in (args.a, args.b):
        if uid not in by_id:
            raise DataError(f"utterance {uid} not in {args.features}")
    print(repr(metric.dissimilarity(by_id[args.a], by_id[args.b])))
    return EXIT_OK


def cmd_neighbors(args) -> int:
    vectors = midlevel.read_features_csv(args.features)
    by_id = {v.utterance_id: v for v in vectors}
    if args.anchor not in by_id:
        raise DataError(f"utterance {args.anchor} not in {args.features}")
    anchor = by_id[args.anchor]
    if args.cross_language:
        pool = vectors
    else:
        lang = _utterance_language(args.anchor)
        pool = [v for v in vectors if _utterance_language(v.utterance_id) == lang]
    try:
        similar, dissimilar = metric.neighbors(anchor, pool, k=args.k)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    print("similar")
    for rank, (v, d) in enumerate(similar, start=1):
        print(f"{v.utterance_id}  {d:.6f}  {rank}")
    print("dissimilar")
    for rank, (v, d) in enumerate(dissimilar, start=1):
        print(f"{v.utterance_id}  {d:.6f}  {rank}")
    return EXIT_OK


def cmd_correlate(args) -> int:
    vectors = midlevel.read_features_csv(args.features)
    manifest = load_manifest(args.manifest, strict=not args.lenient)
    pair_ids = [p.pair_id for p in manifest.pairs]
    if args.cross:
        row_lang, col_lang = "EN", "ES"
    else:
        row_lang = col_lang = args.within.upper()
    X = models.vectors_by_pair(vectors, pair_ids, row_lang, manifest)
    Y = models.vectors_by_pair(vectors, pair_ids, col_lang, manifest)
    Xm = np.stack([X[p].values for p in pair_ids])
    Ym = np.stack([Y[p].values for p in pair_ids])
    m = analysis.correlation_matrix(Xm, Ym, row_lang, col_lang)
    analysis.write_matrix_csv(m, args.out)
    summary = analysis.summarize_diagonal(m, threshold=args.threshold)
    sys.stdout.write(analysis.render_summary(summary))
    return EXIT_OK


def cmd_split(args) -> int:
    manifest = load_manifest(args.manifest, strict=not args.lenient)
    spec = models.split_pairs(manifest.pairs, args.test_fraction, args.seed)
    models.write_split_csv(spec, args.out)
    print(
        f"split: {len(spec.train)} train / {len(spec.test)} test pairs, "
        f"{len(spec.shared_speakers)} shared speaker(s)"
    )
    return EXIT_OK


def _load_direction_vectors(args, pair_ids):
    vectors = midlevel.read_features_csv(args.features)
    manifest = load_manifest(args.manifest) if args.manifest else None
    src_lang, tgt_lang = (s.upper() for s in args.direction.split("-"))
    src = models.vectors_by_pair(vectors, pair_ids, src_lang, manifest)
    tgt = models.vectors_by_pair(vectors, pair_ids, tgt_lang, manifest)
    return src, tgt, manifest


def cmd_fit(args) -> int:
    split = models.read_split_csv(args.split)
    src, tgt, _ = _load_direction_vectors(args, split.train)
    X = np.stack([src[p].values for p in split.train])
    Y = np.stack([tgt[p].values for p in split.train])
    model = models.fit_linear(
        X, Y, args.direction, ridge_lambda=args.ridge, seed=split.seed
    )
    models.save_model(model, args.out)
    print(f"fitted {args.direction} model on {model.n_train} pairs -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    split = models.read_split_csv(args.split)
    src, tgt, manifest = _load_direction_vectors(args, split.test)
    references = {p: tgt[p] for p in split.test}

    if args.naive:
        predictions = {p: models.naive_predict(src[p]) for p in split.test}
        report = models.evaluate(predictions, references, "naive", args.direction)
    elif args.model:
        model = models.load_model(args.model)
        if model.direction != args.direction:
            raise DataError(
                f"model direction {model.direction} does not match "
                f"requested {args.direction}"
            )
        predictions = {p: models.predict(model, src[p]) for p in split.test}
        report = models.evaluate(
            predictions, references, "linear-regression", args.direction
        )
    else:
        exclude = (
            models.read_exclusion_list(args.exclude)
            if args.exclude
            else frozenset()
        )
        report = models.eval_external_audio(
            args.synth_dir,
            args.direction,
            references,
            exclude=exclude,
            manifest=manifest,
        )
    sys.stdout.write(models.render_report(report))
    if args.errors_out:
        models.write_errors_csv(report, args.errors_out)
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = models.load_model(args.model)
    sys.stdout.write(
        models.render_coefficients(models.top_coefficients(model, k=args.top))
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialprosody",
        description="Prosodic representations and dissimilarity for dialog speech.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute feature vectors from audio")
    p.add_argument("--manifest", required=True, help="utterance manifest CSV")
    p.add_argument("--audio-root", required=True, help="directory audio paths are relative to")
    p.add_argument("--out", required=True, help="output feature CSV")
    p.add_argument("--dump-frames", help="directory for per-track frame dumps")
    p.add_argument("--jobs", type=int, default=1, help="parallel track workers")
    p.add_argument("--lenient", action="store_true", help="drop malformed pairs instead of failing")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("distance", help="dissimilarity between two utterances")
    p.add_argument("--features", required=True, help="feature CSV from extract")
    p.add_argument("--a", required=True, help="first utterance_id")
    p.add_argument("--b", required=True, help="second utterance_id")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("neighbors", help="most and least similar utterances")
    p.add_argument("--features", required=True, help="feature CSV from extract")
    p.add_argument("--anchor", required=True, help="anchor utterance_id")
    p.add_argument("--k", type=int, default=4, help="neighbors per block")
    p.add_argument("--cross-language", action="store_true",
                   help="pool both languages instead of the anchor's")
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("correlate", help="Spearman correlation matrix over pairs")
    p.add_argument("--features", required=True, help="feature CSV from extract")
    p.add_argument("--manifest", required=True, help="utterance manifest CSV")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--cross", action="store_true", help="EN rows vs ES columns")
    grp.add_argument("--within", choices=("en", "es"), help="one language vs itself")
    p.add_argument("--out", required=True, help="output matrix CSV")
    p.add_argument("--threshold", type=float, default=analysis.DEFAULT_THRESHOLD,
                   help="diagonal summary threshold")
    p.add_argument("--lenient", action="store_true", help="drop malformed pairs instead of failing")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("split", help="speaker-grouped train/test split")
    p.add_argument("--manifest", required=True, help="utterance manifest CSV")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output split CSV")
    p.add_argument("--lenient", action="store_true", help="drop malformed pairs instead of failing")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit", help="train the linear-regression model")
    p.add_argument("--features", required=True, help="feature CSV from extract")
    p.add_argument("--split", required=True, help="split CSV from split")
    p.add_argument("--direction", required=True, choices=models.DIRECTIONS)
    p.add_argument("--ridge", type=float, default=0.0, help="ridge lambda")
    p.add_argument("--manifest", help="manifest CSV (else utterance IDs follow <LANG>_<pair_id>)")
    p.add_argument("--out", required=True, help="output model JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="evaluate a model on the test pairs")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--model", help="model JSON from fit")
    grp.add_argument("--naive", action="store_true", help="identity baseline")
    grp.add_argument("--synth-dir", help="directory of synthesized <utterance_id>.wav files")
    p.add_argument("--exclude", help="exclusion list, one utterance_id per line")
    p.add_argument("--features", required=True, help="feature CSV from extract")
    p.add_argument("--split", required=True, help="split CSV from split")
    p.add_argument("--direction", required=True, choices=models.DIRECTIONS)
    p.add_argument("--manifest", help="manifest CSV (else utterance IDs follow <LANG>_<pair_id>)")
    p.add_argument("--errors-out", help="optional per-pair error CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect", help="largest-magnitude model coefficients")
    p.add_argument("--model", required=True, help="model JSON from fit")
    p.add_argument("--top", type=int, default=10, help="entries to show")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit 2 for usage errors
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except SplitConstraintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
