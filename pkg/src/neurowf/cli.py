"""Command-line interface: ``neurowf <command> ...``.

Exit codes: 0 success, 2 input error, 3 insufficient data, 4 numerical
failure (bandwidth selection did not converge for more than half of the
subjects).
"""
import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .classifier import (
    LABEL_NAMES,
    WassersteinFrechetClassifier,
    compute_metrics,
    decide,
    prototype_distances,
)
from .ensemble import BinaryRandomForest, PredictionMatrix, predict_forest
from .exceptions import InsufficientData, InvalidInput
from .grid import DEFAULT_N_GRID, DEFAULT_PAD_FRACTION
from .kde import estimate_subject
from .persistence import (
    SCHEMA_VERSION,
    atomic_write_text,
    config_hash,
    dumps,
    forest_from_dict,
    forest_to_dict,
    load_bundle,
    save_bundle,
    write_csv,
)
from .quantiles import QUANTILE_LEVELS, quantile_from_cdf
from .simulation import ExperimentConfig, kde_benchmark, run_experiment, subject_quantiles

logger = logging.getLogger("neurowf")

EXIT_OK, EXIT_INPUT, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class CommandError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# CSV readers


def _read_rows(path, required):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise CommandError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise CommandError(f"{path}: file is empty")
        fields = [f.strip() for f in reader.fieldnames]
        missing = [c for c in required if c not in fields]
        if missing:
            raise CommandError(f"{path}: missing required column(s): {', '.join(missing)}")
        reader.fieldnames = fields
        rows = []
        for line, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise CommandError(f"{path}: row {line} has the wrong number of fields")
            rows.append((line, {k: v.strip() for k, v in row.items()}))
    if not rows:
        raise CommandError(f"{path}: no data rows")
    return rows


def _number(path, line, column, text):
    try:
        value = float(text)
    except ValueError:
        raise CommandError(f"{path}: row {line}: non-numeric {column} {text!r}") from None
    if not math.isfinite(value):
        raise CommandError(f"{path}: row {line}: non-finite {column} {text!r}")
    return value


def read_values(path):
    return np.array([_number(path, ln, "value", r["value"]) for ln, r in _read_rows(path, ["value"])])


def read_samples(path):
    """Long-format samples grouped by subject id."""
    grouped = {}
    for line, row in _read_rows(path, ["subject_id", "value"]):
        if not row["subject_id"]:
            raise CommandError(f"{path}: row {line}: empty subject_id")
        grouped.setdefault(row["subject_id"], []).append(_number(path, line, "value", row["value"]))
    return {sid: np.sort(np.asarray(v)) for sid, v in grouped.items()}


def _parse_label(path, line, text):
    key = text.strip().lower()
    if key in ("control", "0"):
        return 0
    if key in ("mtbi", "1"):
        return 1
    raise CommandError(f"{path}: row {line}: label must be 'control' or 'mtbi', got {text!r}")


def read_subjects(path, require_label):
    required = ["subject_id", "age", "gender"] + (["label"] if require_label else [])
    subjects = {}
    for line, row in _read_rows(path, required):
        sid = row["subject_id"]
        if sid in subjects:
            raise CommandError(f"{path}: row {line}: duplicate subject_id {sid!r}")
        z = [_number(path, line, "age", row["age"]), _number(path, line, "gender", row["gender"])]
        label = None
        if row.get("label"):
            label = _parse_label(path, line, row["label"])
        elif require_label:
            raise CommandError(f"{path}: row {line}: missing label")
        subjects[sid] = (np.array(z), label)
    return subjects


def _join(samples, subjects, samples_path):
    unknown = sorted(set(samples) - set(subjects))
    if unknown:
        raise CommandError(f"{samples_path}: subject(s) not in subjects file: {', '.join(unknown[:5])}")
    empty = sorted(set(subjects) - set(samples))
    if empty:
        raise CommandError(f"subject(s) without samples: {', '.join(empty[:5])}")
    ids = sorted(subjects)
    for sid in ids:
        if samples[sid].size < 2:
            raise CommandError(f"subject {sid!r} needs at least two samples", EXIT_DATA)
    return ids


def _quantiles_for(ids, samples, n_grid, pad):
    Q, converged = subject_quantiles([samples[s] for s in ids], n_grid, pad)
    failed = int(np.sum(~converged))
    if failed:
        logger.warning("bandwidth fallback used for %d of %d subject(s)", failed, len(ids))
    if failed * 2 > len(ids):
        raise CommandError(f"bandwidth selection failed for {failed} of {len(ids)} subjects", EXIT_NUMERIC)
    return Q


def _parse_kgrid(text):
    try:
        parts = [float(p) for p in text.split(":")]
    except ValueError:
        raise CommandError(f"--kgrid must be start:stop:step, got {text!r}") from None
    if len(parts) != 3 or parts[2] <= 0 or parts[0] <= 0 or parts[1] < parts[0]:
        raise CommandError(f"--kgrid must be start:stop:step with 0 < start <= stop, got {text!r}")
    start, stop, step = parts
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 10)


# ---------------------------------------------------------------------------
# commands


def cmd_kde(args):
    x = read_values(args.input)
    try:
        est = estimate_subject(x, args.grid, args.pad)
    except InvalidInput as exc:
        raise CommandError(f"{args.input}: {exc}") from exc
    bw = est.bandwidth
    qf = quantile_from_cdf(est.grid, est.cdf)
    out = {
        "n_samples": int(x.size),
        "grid": est.grid.tolist(),
        "density": est.density.tolist(),
        "cdf": est.cdf.tolist(),
        "levels": QUANTILE_LEVELS.tolist(),
        "quantiles": qf.values.tolist(),
        "bandwidth": {
            "t_star": bw.t_star,
            "t_cdf": bw.t_cdf,
            "h": bw.h,
            "h_cdf": bw.h_cdf,
            "data_range": bw.data_range,
            "converged": bw.converged,
            "stages": [[s, t] for s, t in bw.stages],
        },
    }
    atomic_write_text(args.out, dumps(out))
    return EXIT_OK


def cmd_kde_bench(args):
    try:
        n_list = [int(v) for v in args.n_list.split(",") if v.strip()]
    except ValueError:
        raise CommandError(f"--n-list must be comma-separated integers, got {args.n_list!r}") from None
    if not n_list or min(n_list) < 2 or args.reps < 1:
        raise CommandError("--n-list values must be >= 2 and --reps >= 1")
    rows = kde_benchmark(n_list, args.reps, args.seed)
    write_csv(args.out, ["n", "rep", "tv"], [(r["n"], r["rep"], r["tv"]) for r in rows])
    for n in n_list:
        tvs = [r["tv"] for r in rows if r["n"] == n]
        print(f"n={n}: median tv={np.median(tvs):.4f}")
    return EXIT_OK


def cmd_fit(args):
    kgrid = _parse_kgrid(args.kgrid)
    if args.kfolds < 2:
        raise CommandError("--kfolds must be at least 2")
    samples = read_samples(args.samples)
    subjects = read_subjects(args.subjects, require_label=True)
    ids = _join(samples, subjects, args.samples)
    y = np.array([subjects[s][1] for s in ids])
    counts = np.bincount(y, minlength=2)
    if counts.min() == 0:
        raise CommandError("cohort contains a single class; need both control and mtbi", EXIT_DATA)
    if counts.min() < 2:
        raise CommandError("need at least two subjects per class", EXIT_DATA)
    Z = np.vstack([subjects[s][0] for s in ids])
    Q = _quantiles_for(ids, samples, DEFAULT_N_GRID, DEFAULT_PAD_FRACTION)
    clf = WassersteinFrechetClassifier(n_covariates=2, k_grid=kgrid, folds=args.kfolds,
                                       random_state=args.seed)
    try:
        clf.fit(np.column_stack([Z, Q]), y)
    except InsufficientData as exc:
        raise CommandError(str(exc), EXIT_DATA) from exc
    config = {
        "kfolds": args.kfolds,
        "kgrid": args.kgrid,
        "n_grid": DEFAULT_N_GRID,
        "pad_fraction": DEFAULT_PAD_FRACTION,
        "seed": args.seed,
    }
    provenance = {"seed": args.seed, "config": config, "config_hash": config_hash(config),
                  "subjects": ids, "cv_scores": [float(s) for s in clf.cv_scores_]}
    save_bundle(args.out, clf.control_model_, clf.mtbi_model_, clf.k_, provenance=provenance)
    print(f"fitted {counts[0]} control / {counts[1]} mTBI subjects; k={clf.k_:g}")
    return EXIT_OK


def cmd_predict(args):
    try:
        control, mtbi, k, _, provenance = load_bundle(args.model)
    except OSError as exc:
        raise CommandError(f"cannot open {args.model}: {exc.strerror}") from exc
    if control.levels.size != QUANTILE_LEVELS.size:
        raise CommandError("model quantile grid does not match this version")
    samples = read_samples(args.samples)
    subjects = read_subjects(args.subjects, require_label=False)
    ids = _join(samples, subjects, args.samples)
    cfg = provenance.get("config", {}) if isinstance(provenance, dict) else {}
    Q = _quantiles_for(ids, samples, int(cfg.get("n_grid", DEFAULT_N_GRID)),
                       float(cfg.get("pad_fraction", DEFAULT_PAD_FRACTION)))
    Z = np.vstack([subjects[s][0] for s in ids])
    if Z.shape[1] != control.n_covariates:
        raise CommandError("covariate dimension does not match the model")
    d1, d2 = prototype_distances(control, mtbi, Q, Z)
    pred = decide(d1, d2, k)
    write_csv(args.out, ["subject_id", "d1", "d2", "k", "label"],
              [(sid, float(a), float(b), float(k), LABEL_NAMES[p]) for sid, a, b, p in zip(ids, d1, d2, pred)])
    labels = [subjects[s][1] for s in ids]
    if all(lab is not None for lab in labels):
        m = compute_metrics(pred, labels)
        print(f"acc={m.acc:.4f} balanced_f1={m.f1:.4f}")
    return EXIT_OK


def cmd_sim(args):
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise CommandError(f"cannot open {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise CommandError(f"{args.config}: invalid JSON ({exc})") from exc
    if args.seed is not None:
        data["seed"] = args.seed
    if args.full_scale:
        data["full_scale"] = True
    try:
        config = ExperimentConfig.from_dict(data)
    except (InvalidInput, TypeError) as exc:
        raise CommandError(f"invalid experiment config: {exc}") from exc
    os.makedirs(args.out_dir, exist_ok=True)
    rows = run_experiment(config)
    cols = ["nu1", "sigma1", "acc_wf", "acc_linear", "k_selected", "seed"]
    write_csv(os.path.join(args.out_dir, "results.csv"), cols, [[r[c] for c in cols] for r in rows])
    summary = {
        "config": config.to_dict(),
        "n_cells": len(rows),
        "mean_acc_wf": float(np.mean([r["acc_wf"] for r in rows])),
        "mean_acc_linear": float(np.mean([r["acc_linear"] for r in rows])),
    }
    atomic_write_text(os.path.join(args.out_dir, "summary.json"), dumps(summary))
    print(f"{len(rows)} cells: mean acc wf={summary['mean_acc_wf']:.4f} "
          f"linear={summary['mean_acc_linear']:.4f}")
    return EXIT_OK


def read_channels(path):
    rows = _read_rows(path, ["subject_id"])
    columns = [c for c in rows[0][1] if c != "subject_id"]
    if not columns:
        raise CommandError(f"{path}: no channel columns")
    ids, values = [], []
    for line, row in rows:
        vals = []
        for c in columns:
            if row[c] not in ("0", "1"):
                raise CommandError(f"{path}: row {line}: channel {c} must be 0 or 1, got {row[c]!r}")
            vals.append(int(row[c]))
        ids.append(row["subject_id"])
        values.append(vals)
    if len(set(ids)) != len(ids):
        raise CommandError(f"{path}: duplicate subject_id")
    return PredictionMatrix(np.array(values), tuple(columns), tuple(ids))


def read_labels(path):
    return {row["subject_id"]: _parse_label(path, line, row["label"])
            for line, row in _read_rows(path, ["subject_id", "label"])}


def _aligned_labels(matrix, labels, path):
    missing = [s for s in matrix.subject_ids if s not in labels]
    if missing:
        raise CommandError(f"{path}: no label for subject(s) {', '.join(missing[:5])}")
    return np.array([labels[s] for s in matrix.subject_ids])


def cmd_ensemble(args):
    Z = read_channels(args.channels)
    y = _aligned_labels(Z, read_labels(args.labels), args.labels)
    if np.bincount(y, minlength=2).min() < 2:
        raise CommandError("each class needs at least two subjects", EXIT_DATA)
    rf = BinaryRandomForest(args.n_trees, args.max_depth, args.features_per_split, args.seed)
    try:
        rf.fit(Z, y)
    except InvalidInput as exc:
        raise CommandError(str(exc)) from exc
    train_acc = float(np.mean(rf.predict(Z) == y))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "forest",
        "forest": forest_to_dict(rf.forest_),
        "train_accuracy": train_acc,
        "oob_accuracy": None if math.isnan(rf.oob_score_) else rf.oob_score_,
    }
    atomic_write_text(args.out, dumps(doc))
    print(f"train acc={train_acc:.4f} oob acc={rf.oob_score_:.4f}")
    return EXIT_OK


def cmd_ensemble_predict(args):
    try:
        with open(args.model) as fh:
            doc = json.load(fh)
        if doc.get("schema_version") != SCHEMA_VERSION or doc.get("kind") != "forest":
            raise CommandError(f"{args.model}: not a forest model file")
        forest = forest_from_dict(doc["forest"])
    except OSError as exc:
        raise CommandError(f"cannot open {args.model}: {exc.strerror}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CommandError(f"{args.model}: malformed forest model ({exc})") from exc
    Z = read_channels(args.channels)
    if forest.column_names and tuple(forest.column_names) != Z.column_names:
        raise CommandError("channel columns do not match the trained model")
    if Z.n_columns != forest.n_columns:
        raise CommandError(f"expected {forest.n_columns} channel columns, got {Z.n_columns}")
    pred = predict_forest(forest, Z)
    write_csv(args.out, ["subject_id", "label"], [(s, LABEL_NAMES[p]) for s, p in zip(Z.subject_ids, pred)])
    if args.labels:
        y = _aligned_labels(Z, read_labels(args.labels), args.labels)
        print(f"acc={compute_metrics(pred, y).acc:.4f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="neurowf", description="Wasserstein-Fréchet regression toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kde", help="estimate density, CDF and quantiles of one sample")
    p.add_argument("--input", required=True, help="CSV with a numeric 'value' column")
    p.add_argument("--out", required=True, help="output JSON")
    p.add_argument("--grid", type=int, default=DEFAULT_N_GRID, help="number of bins (power of two)")
    p.add_argument("--pad", type=float, default=DEFAULT_PAD_FRACTION, help="range padding fraction")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; the KDE is deterministic")
    p.set_defaults(func=cmd_kde)

    p = sub.add_parser("kde-bench", help="total-variation benchmark on the Gaussian mixture")
    p.add_argument("--n-list", default="50,100,200,400")
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV (n, rep, tv)")
    p.set_defaults(func=cmd_kde_bench)

    p = sub.add_parser("fit", help="fit group prototypes and the decision threshold")
    p.add_argument("--samples", required=True, help="long CSV: subject_id,value")
    p.add_argument("--subjects", required=True, help="CSV: subject_id,age,gender,label")
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--kfolds", type=int, default=5)
    p.add_argument("--kgrid", default="0.5:2.0:0.05", help="start:stop:step")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="classify subjects with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--subjects", required=True, help="CSV: subject_id,age,gender[,label]")
    p.add_argument("--out", required=True, help="output CSV: subject_id,d1,d2,k,label")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; prediction is deterministic")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sim", help="run the two-group simulation grid")
    p.add_argument("--config", help="JSON experiment config (defaults used when omitted)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--full-scale", action="store_true", help="2000 subjects/group, 1000 obs/subject")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("ensemble", help="train a forest on binary channel decisions")
    p.add_argument("--channels", required=True, help="CSV: subject_id, then one 0/1 column per channel")
    p.add_argument("--labels", required=True, help="CSV: subject_id,label")
    p.add_argument("--out", required=True, help="output forest JSON")
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--features-per-split", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("ensemble-predict", help="apply a trained forest")
    p.add_argument("--model", required=True)
    p.add_argument("--channels", required=True)
    p.add_argument("--out", required=True, help="output CSV: subject_id,label")
    p.add_argument("--labels", help="optional CSV of true labels; prints accuracy")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; prediction is deterministic")
    p.set_defaults(func=cmd_ensemble_predict)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"neurowf {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except InsufficientData as exc:
        print(f"neurowf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidInput as exc:
        print(f"neurowf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
