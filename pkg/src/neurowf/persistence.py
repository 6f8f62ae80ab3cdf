"""JSON persistence for model bundles and CSV helpers.

Floats are written with Python's shortest round-trip ``repr`` and keys are
sorted, so saving the same model twice yields identical bytes.
"""
import csv
import hashlib
import io
import json
import os
import tempfile

import numpy as np

from .ensemble import ForestModel, Tree
from .exceptions import InvalidInput
from .frechet import FrechetModel
from .quantiles import N_LEVELS

SCHEMA_VERSION = 1


def atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def config_hash(config):
    return hashlib.sha256(dumps(config).encode()).hexdigest()[:16]


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def frechet_model_to_dict(model):
    return {
        "group_tag": model.group_tag,
        "n_subjects": int(model.n_subjects),
        "n_covariates": int(model.n_covariates),
        "quantile_matrix": [_floats(r) for r in model.quantile_matrix],
        "covariates": [_floats(r) for r in model.covariates],
        "z_bar": _floats(model.z_bar),
        "sigma_hat": [_floats(r) for r in model.sigma_hat],
        "ridge": float(model.ridge),
    }


def frechet_model_from_dict(d, levels):
    Q = np.asarray(d["quantile_matrix"], dtype=float)
    Z = np.asarray(d["covariates"], dtype=float).reshape(Q.shape[0], int(d["n_covariates"]))
    if Q.ndim != 2 or Q.shape[1] != levels.size:
        raise InvalidInput("stored quantile matrix does not match the level grid")
    return FrechetModel(
        quantile_matrix=Q,
        covariates=Z,
        z_bar=np.asarray(d["z_bar"], dtype=float),
        sigma_hat=np.asarray(d["sigma_hat"], dtype=float).reshape(Z.shape[1], Z.shape[1]),
        ridge=float(d["ridge"]),
        group_tag=str(d.get("group_tag", "")),
        levels=levels,
    )


def forest_to_dict(model):
    return {
        "n_trees": model.n_trees,
        "max_depth": model.max_depth,
        "features_per_split": model.features_per_split,
        "seed": model.seed,
        "n_columns": model.n_columns,
        "column_names": list(model.column_names),
        "trees": [
            {
                "feature": t.feature.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "counts": t.counts.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ],
    }


def forest_from_dict(d):
    trees = tuple(
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int64),
            left=np.asarray(t["left"], dtype=np.int64),
            right=np.asarray(t["right"], dtype=np.int64),
            counts=np.asarray(t["counts"], dtype=np.int64).reshape(-1, 2),
            value=np.asarray(t["value"], dtype=np.int8),
        )
        for t in d["trees"]
    )
    return ForestModel(trees, int(d["n_trees"]), int(d["max_depth"]), int(d["features_per_split"]),
                       int(d["seed"]), int(d["n_columns"]), tuple(d.get("column_names", ())))


def bundle_to_dict(control, mtbi, k, forest=None, provenance=None):
    if not np.array_equal(control.levels, mtbi.levels):
        raise InvalidInput("group models use different quantile grids")
    if control.n_covariates != mtbi.n_covariates:
        raise InvalidInput("group models use different covariate dimensions")
    m = control.levels.size
    return {
        "schema_version": SCHEMA_VERSION,
        "quantile_grid": {"m": int(m), "spacing": 1.0 / (m - 1)},
        "control": frechet_model_to_dict(control),
        "mtbi": frechet_model_to_dict(mtbi),
        "k": float(k),
        "forest": None if forest is None else forest_to_dict(forest),
        "provenance": provenance or {},
    }


def bundle_from_dict(d):
    """Return ``(control, mtbi, k, forest, provenance)``."""
    if not isinstance(d, dict) or d.get("schema_version") != SCHEMA_VERSION:
        raise InvalidInput(f"unsupported model schema_version {d.get('schema_version')!r}"
                           if isinstance(d, dict) else "model file is not a JSON object")
    try:
        grid = d["quantile_grid"]
        m = int(grid["m"])
        if m < 2 or abs(float(grid["spacing"]) * (m - 1) - 1.0) > 1e-12:
            raise InvalidInput("inconsistent quantile grid descriptor")
        levels = np.linspace(0.0, 1.0, m)
        control = frechet_model_from_dict(d["control"], levels)
        mtbi = frechet_model_from_dict(d["mtbi"], levels)
        forest = forest_from_dict(d["forest"]) if d.get("forest") else None
        return control, mtbi, float(d["k"]), forest, d.get("provenance", {})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"malformed model bundle: {exc}") from exc


def save_bundle(path, control, mtbi, k, forest=None, provenance=None):
    atomic_write_text(path, dumps(bundle_to_dict(control, mtbi, k, forest, provenance)))


def load_bundle(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: not valid JSON ({exc})") from exc
    return bundle_from_dict(data)


def write_csv(path, header, rows):
    """Write rows atomically; floats use shortest round-trip repr."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    atomic_write_text(path, buf.getvalue())


__all__ = [
    "N_LEVELS",
    "SCHEMA_VERSION",
    "atomic_write_text",
    "bundle_from_dict",
    "bundle_to_dict",
    "config_hash",
    "dumps",
    "forest_from_dict",
    "forest_to_dict",
    "load_bundle",
    "save_bundle",
    "write_csv",
]
