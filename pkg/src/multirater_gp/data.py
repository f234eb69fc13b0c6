"""Dataset files, model files and a seeded synthetic multi-rater generator."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .dataset import Dataset, DatasetError
from .linalg import Hyperparameters, cholesky, kernel_matrix
from .models import TrainedModel, fit
from .whitening import WhiteningTransform

__all__ = [
    "MODEL_FORMAT",
    "MODEL_VERSION",
    "SyntheticSpec",
    "make_rng",
    "generate_synthetic",
    "dataset_to_dict",
    "dataset_from_dict",
    "dataset_checksum",
    "load_dataset",
    "save_dataset",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "dump_json",
]

MODEL_FORMAT = "multirater-gp-model"
MODEL_VERSION = 1


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the one stream used for every seeded draw in the package."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic multi-rater regression problem.

    Ratings are ``midpoint + scale * (f(x) + noise)`` with ``f`` drawn from
    the GP prior under (s, l) and noise of standard deviation ``sigma``,
    then clamped to the score range (and rounded unless ``rounded=False``).
    """

    n_train: int = 300
    n_test: int = 200
    dim: int = 2
    s: float = 2.0
    l: float = 1.0
    sigma: float = 0.8
    raters: int = 5
    score_min: int = 0
    score_max: int = 10
    seed: int = 0
    rounded: bool = True
    scale: float = 1.0

    def __post_init__(self):
        for name in ("n_train", "n_test", "dim", "raters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not (self.s > 0 and self.l > 0 and self.sigma >= 0 and self.scale > 0):
            raise ValueError("need s > 0, l > 0, sigma >= 0, scale > 0")
        if self.score_min >= self.score_max:
            raise ValueError("score_min must be below score_max")

    @property
    def true_hp(self) -> Hyperparameters:
        return Hyperparameters.from_natural(self.s, self.l, self.sigma)

    def to_dict(self):
        return asdict(self)


def generate_synthetic(spec: SyntheticSpec):
    """Draw train and test datasets sharing one latent function.

    Returns
    -------
    train, test : Dataset
    truth : dict
        Latent values ``f_train`` and ``f_test`` on the rating scale, plus
        the unrounded, unclamped ratings.
    """
    rng = make_rng(spec.seed)
    n = spec.n_train + spec.n_test
    X = rng.uniform(-2.0, 2.0, size=(n, spec.dim))
    hp = Hyperparameters.from_natural(spec.s, spec.l, 1.0)
    L = cholesky(kernel_matrix(X, None, hp), jitter=1e-10 * spec.s**2)
    f = L.lower @ rng.standard_normal(n)
    noise = spec.sigma * rng.standard_normal((n, spec.raters))
    mid = 0.5 * (spec.score_min + spec.score_max)
    raw = mid + spec.scale * (f[:, None] + noise)
    ratings = np.rint(raw) if spec.rounded else raw.copy()
    ratings = np.clip(ratings, spec.score_min, spec.score_max)

    tr, te = slice(0, spec.n_train), slice(spec.n_train, n)
    train = Dataset(X[tr], ratings[tr], spec.score_min, spec.score_max)
    test = Dataset(X[te], ratings[te], spec.score_min, spec.score_max)
    truth = {
        "f_train": mid + spec.scale * f[tr],
        "f_test": mid + spec.scale * f[te],
        "raw_train": raw[tr],
        "raw_test": raw[te],
    }
    return train, test, truth


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "score_min": ds.score_min,
        "score_max": ds.score_max,
        "items": [
            {"features": ds.features[i].tolist(), "ratings": [_num(r) for r in row]}
            for i, row in enumerate(ds.rating_rows())
        ],
    }


def dataset_from_dict(d: dict) -> Dataset:
    for key in ("score_min", "score_max", "items"):
        if key not in d:
            raise DatasetError(f"missing top-level field {key!r}")
    items = d["items"]
    if not isinstance(items, list) or not items:
        raise DatasetError("'items' must be a non-empty list")
    feats, rows = [], []
    width = None
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "features" not in item or "ratings" not in item:
            raise DatasetError(f"row {i}: item needs 'features' and 'ratings'")
        f, r = item["features"], item["ratings"]
        if not isinstance(f, list) or not f:
            raise DatasetError(f"row {i}: 'features' must be a non-empty list")
        if not isinstance(r, list) or not r:
            raise DatasetError(f"row {i}: 'ratings' must be a non-empty list")
        if width is None:
            width = len(f)
        elif len(f) != width:
            raise DatasetError(f"row {i}: expected {width} features, got {len(f)}")
        try:
            feats.append([float(v) for v in f])
            rows.append([float(v) for v in r])
        except (TypeError, ValueError) as exc:
            raise DatasetError(f"row {i}: non-numeric value ({exc})") from None
    return Dataset(np.array(feats), rows, d["score_min"], d["score_max"])


def dataset_checksum(ds: Dataset) -> str:
    blob = json.dumps(dataset_to_dict(ds), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def dump_json(obj, path) -> None:
    """Write JSON with sorted keys and a trailing newline, so reruns diff cleanly."""
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, allow_nan=False)
        fh.write("\n")


def _format_for(path, fmt):
    if fmt is None:
        fmt = Path(path).suffix.lstrip(".").lower()
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown dataset format {fmt!r}; use json or csv")
    return fmt


def save_dataset(ds: Dataset, path, format: str | None = None) -> None:
    fmt = _format_for(path, format)
    if fmt == "json":
        dump_json(dataset_to_dict(ds), path)
        return
    if not ds.is_rectangular:
        raise DatasetError("csv needs the same number of ratings on every row; use json")
    D, R = ds.dim, ds.ratings.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(f"# score_min={ds.score_min} score_max={ds.score_max}\n")
        w = csv.writer(fh)
        w.writerow([f"f{j}" for j in range(D)] + [f"r{j}" for j in range(R)])
        for x, y in zip(ds.features, ds.ratings):
            w.writerow([repr(float(v)) for v in x] + [repr(_num(v)) for v in y])


def load_dataset(path, format: str | None = None, score_range=None) -> Dataset:
    """Read a dataset file.

    CSV files carry their score range in a leading ``# score_min=.. score_max=..``
    comment; ``score_range`` overrides it and is required when it is absent.
    """
    fmt = _format_for(path, format)
    if fmt == "json":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise DatasetError(f"{path}: top level must be an object")
        ds = dataset_from_dict(d)
        if score_range is not None:
            ds = Dataset(ds.features, ds.ratings, *score_range)
        return ds

    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    meta = {}
    while lines and lines[0].startswith("#"):
        for tok in lines.pop(0).lstrip("#").split():
            k, _, v = tok.partition("=")
            meta[k] = v
    if score_range is None:
        if "score_min" not in meta or "score_max" not in meta:
            raise DatasetError(f"{path}: no score range in header and none given")
        score_range = (int(meta["score_min"]), int(meta["score_max"]))
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError(f"{path}: empty file") from None
    fcols = [j for j, h in enumerate(header) if h.startswith("f")]
    rcols = [j for j, h in enumerate(header) if h.startswith("r")]
    if not fcols or not rcols or len(fcols) + len(rcols) != len(header):
        raise DatasetError(f"{path}: header must be f0..f(D-1), r0..r(R-1)")
    feats, rates = [], []
    for i, row in enumerate(reader):
        if len(row) != len(header):
            raise DatasetError(f"row {i}: expected {len(header)} fields, got {len(row)}")
        try:
            feats.append([float(row[j]) for j in fcols])
            rates.append([float(row[j]) for j in rcols])
        except ValueError as exc:
            raise DatasetError(f"row {i}: {exc}") from None
    if not feats:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(np.array(feats), np.array(rates), *score_range)


def model_to_dict(model: TrainedModel, train: Dataset) -> dict:
    """Versioned, self-contained description of a trained model.

    ``train`` is the dataset the model was fit on (whitened features); the
    factorization itself is not stored and is recomputed on load.
    """
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "variant": model.variant,
        "hyperparameters": model.hp.to_dict(),
        "offset": model.offset,
        "whitening": None if model.whitening is None else model.whitening.to_dict(),
        "train": dataset_to_dict(train),
    }


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a model file (format={d.get('format')!r})")
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    hp = Hyperparameters.from_dict(d["hyperparameters"])
    train = dataset_from_dict(d["train"]).centered(float(d["offset"]))
    wt = d.get("whitening")
    whitening = None if wt is None else WhiteningTransform.from_dict(wt)
    return fit(train, d["variant"], hp, whitening=whitening)


def save_model(model: TrainedModel, train: Dataset, path) -> None:
    dump_json(model_to_dict(model, train), path)


def load_model(path) -> TrainedModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
