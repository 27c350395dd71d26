"""Dataset, predictions and report files.

Datasets are a CSV (header ``x1..xD,y``; ``y`` empty on unlabeled rows, which
come after the labeled ones) plus a JSON sidecar with the same stem.  Floats are
written with ``repr`` so every value round-trips exactly.
"""

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import MetadataError, ParseError
from ..geometry import LabeledDataset, ManifoldSpec, PointCloud, TargetFnSpec


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def _fmt(x):
    return repr(float(x))


def save_dataset(path, dataset):
    path = Path(path)
    cloud = dataset.cloud
    D = cloud.spec.ambient_dim
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(D)] + ["y"])
        for i, row in enumerate(cloud.points):
            y = _fmt(dataset.y[i]) if i < cloud.m else ""
            w.writerow([_fmt(v) for v in row] + [y])
    meta = {
        "kind": cloud.spec.kind,
        "d": cloud.spec.intrinsic_dim,
        "ambient_dim": D,
        "m": cloud.m,
        "n": cloud.n,
        "seed": cloud.seed,
        "fn_spec": dataset.fn_spec.to_dict(),
        "noise_sigma": dataset.noise_sigma,
    }
    if cloud.spec.kind == "torus2":
        meta["radii"] = list(cloud.spec.torus_radii)
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def load_dataset(path):
    path = Path(path)
    side = sidecar_path(path)
    try:
        meta = json.loads(side.read_text())
    except OSError as exc:
        raise MetadataError(f"missing sidecar {side}") from exc
    except json.JSONDecodeError as exc:
        raise MetadataError(f"{side}: invalid JSON ({exc})") from exc
    try:
        spec = ManifoldSpec.from_dict(meta)
        D, m, n = int(meta["ambient_dim"]), int(meta["m"]), int(meta["n"])
        fn_spec = TargetFnSpec.from_dict(meta["fn_spec"])
        sigma = float(meta["noise_sigma"])
        seed = int(meta.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise MetadataError(f"{side}: bad metadata ({exc})") from exc
    if D != spec.ambient_dim or int(meta.get("d", spec.intrinsic_dim)) != spec.intrinsic_dim:
        raise MetadataError(f"{side}: dimensions inconsistent with kind {spec.kind}")

    points, ys = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = [f"x{k + 1}" for k in range(D)] + ["y"]
        if header != expected:
            raise ParseError(f"header {header} != {expected}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != D + 1:
                raise ParseError(f"expected {D + 1} fields, got {len(row)}", line=lineno)
            try:
                points.append([float(v) for v in row[:D]])
                ys.append(float(row[D]) if row[D] != "" else None)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    if len(points) != m + n:
        raise MetadataError(f"sidecar declares m + n = {m + n} rows, CSV has {len(points)}")
    for i, y in enumerate(ys):
        if i < m and y is None:
            raise MetadataError(f"labeled row {i + 2} has no response")
        if i >= m and y is not None:
            raise MetadataError(f"unlabeled row {i + 2} carries a response")
    cloud = PointCloud(np.array(points, dtype=float).reshape(-1, D), m, spec, seed)
    return LabeledDataset(cloud, np.array(ys[:m], dtype=float), sigma, fn_spec)


def datasets_equal(a, b):
    return (
        a.cloud.spec == b.cloud.spec
        and a.cloud.m == b.cloud.m
        and a.cloud.seed == b.cloud.seed
        and np.array_equal(a.cloud.points, b.cloud.points)
        and np.array_equal(a.y, b.y)
        and a.noise_sigma == b.noise_sigma
        and a.fn_spec == b.fn_spec
    )


def write_predictions(path, table):
    """CSV with columns index,labeled,x1..xD,f_star,f_hat."""
    D = table["x"].shape[1]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "labeled"] + [f"x{k + 1}" for k in range(D)] + ["f_star", "f_hat"])
        for i in range(table["x"].shape[0]):
            w.writerow(
                [i, int(table["labeled"][i])]
                + [_fmt(v) for v in table["x"][i]]
                + [_fmt(table["f_star"][i]), _fmt(table["f_hat"][i])]
            )


def read_predictions(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    xs = sorted((k for k in rows[0] if k.startswith("x")), key=lambda k: int(k[1:]))
    return {
        "index": np.array([int(r["index"]) for r in rows]),
        "labeled": np.array([r["labeled"] == "1" for r in rows]),
        "x": np.array([[float(r[k]) for k in xs] for r in rows]),
        "f_star": np.array([float(r["f_star"]) for r in rows]),
        "f_hat": np.array([float(r["f_hat"]) for r in rows]),
    }


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o)}")
