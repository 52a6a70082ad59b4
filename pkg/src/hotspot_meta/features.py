"""Density-grid features around each fragment.

A ``window`` x ``window`` box is centred on the fragment and rotated so the
outward normal points along +x; each of the ``grid`` x ``grid`` cells holds the
exact fraction of its area covered by layout geometry. Rows run from low to
high y in the rotated frame, columns from low to high x.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import DataError
from .geom import Fragment, Layout


@dataclass(frozen=True)
class FeatureVector:
    fragment_id: int
    values: np.ndarray
    normalized: bool = False


@dataclass(frozen=True)
class CalibSample:
    features: FeatureVector
    t_litho: int

    @property
    def fragment_id(self) -> int:
        return self.features.fragment_id


@dataclass(frozen=True)
class NormParams:
    mean: np.ndarray
    scale: np.ndarray = field(repr=False)

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.shape[0]:
            raise DataError(f"feature dimension {X.shape[-1]} != normalizer dimension {self.mean.shape[0]}")
        return (X - self.mean) / self.scale


# rotation taking each outward normal onto +x, as (x, y) -> (a*x + b*y, c*x + d*y)
_ROTATIONS = {
    (1, 0): (1, 0, 0, 1),
    (-1, 0): (-1, 0, 0, -1),
    (0, 1): (0, 1, -1, 0),
    (0, -1): (0, -1, 1, 0),
}


def canonical_rects(layout: Layout, fragment: Fragment, window: int) -> np.ndarray:
    """Rects near the fragment in window-local coordinates, doubled so that
    half-integer fragment centres stay integral. The window is ``[0, 2*window]^2``."""
    cx, cy = fragment.center
    half = window / 2
    idx = layout.neighbours(cx - half, cy - half, cx + half, cy + half)
    r = layout.rect_array_int[idx]
    ccx, ccy = int(round(2 * cx)), int(round(2 * cy))
    xs = 2 * r[:, (0, 2)] - ccx
    ys = 2 * r[:, (1, 3)] - ccy
    a, b, c, d = _ROTATIONS[fragment.normal]
    rx = a * xs + b * ys
    ry = c * xs + d * ys
    out = np.empty((len(idx), 4), dtype=np.int64)
    out[:, 0] = rx.min(axis=1) + window
    out[:, 2] = rx.max(axis=1) + window
    out[:, 1] = ry.min(axis=1) + window
    out[:, 3] = ry.max(axis=1) + window
    return np.ascontiguousarray(out)


def _check_window(window: int, grid: int) -> None:
    if window <= 0:
        raise DataError(f"window must be positive, got {window}")
    if grid < 2:
        raise DataError(f"grid must be at least 2, got {grid}")
    if (2 * window) % grid:
        raise DataError(f"2*window ({2 * window}) must be divisible by grid ({grid})")


def extract_features(layout: Layout, fragment: Fragment, window: int = 1200, grid: int = 8) -> FeatureVector:
    _check_window(window, grid)
    rects = canonical_rects(layout, fragment, window)
    return FeatureVector(fragment.id, kernels.coverage_grid(rects, 2 * window, grid))


def extract_all(layout: Layout, fragments, window: int = 1200, grid: int = 8, workers: int = 1):
    """Returns ``(ids, X)`` with rows ordered by fragment id."""
    _check_window(window, grid)
    fragments = sorted(fragments, key=lambda f: f.id)

    def one(f):
        return kernels.coverage_grid(canonical_rects(layout, f, window), 2 * window, grid)

    if workers > 1 and len(fragments) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, fragments, chunksize=64))
    else:
        rows = [one(f) for f in fragments]
    ids = np.array([f.id for f in fragments], dtype=np.int64)
    X = np.vstack(rows) if rows else np.zeros((0, grid * grid))
    return ids, X


def fit_norm(X) -> NormParams:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError(f"need at least 2 samples to normalize, got {X.shape[0] if X.ndim == 2 else 0}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)
    return NormParams(mean, scale)


def normalize_dataset(samples: list[CalibSample]) -> tuple[list[CalibSample], NormParams]:
    """Zero-mean, unit-deviation per dimension; zero-variance dims keep scale 1.

    Refuses samples already marked normalized, since the transform is not
    idempotent.
    """
    if not samples:
        raise DataError("cannot normalize an empty dataset")
    if any(s.features.normalized for s in samples):
        raise DataError("samples are already normalized")
    X = np.vstack([s.features.values for s in samples])
    norm = fit_norm(X)
    Z = norm.apply(X)
    out = [
        CalibSample(FeatureVector(s.features.fragment_id, Z[i], normalized=True), s.t_litho)
        for i, s in enumerate(samples)
    ]
    return out, norm


def samples_from_arrays(ids, X, t) -> list[CalibSample]:
    return [CalibSample(FeatureVector(int(i), np.asarray(x, dtype=np.float64)), int(y)) for i, x, y in zip(ids, X, t)]


def samples_to_arrays(samples: list[CalibSample]):
    ids = np.array([s.fragment_id for s in samples], dtype=np.int64)
    dim = len(samples[0].features.values) if samples else 0
    X = np.vstack([s.features.values for s in samples]) if samples else np.zeros((0, dim))
    t = np.array([s.t_litho for s in samples], dtype=np.float64)
    return ids, X, t


def write_samples(path, ids, t, X, header: list[str] | None = None) -> None:
    X = np.asarray(X)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header or []:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fragment_id", "t_litho"] + [f"f{k}" for k in range(X.shape[1])])
        for i, y, row in zip(ids, t, X):
            w.writerow([int(i), int(y)] + [repr(float(v)) for v in row])


def read_samples(path):
    """Returns ``(ids, t, X)``."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [line for line in fh if not line.startswith("#")]
    except OSError as exc:
        raise DataError(f"cannot read samples {path}: {exc}") from exc
    reader = csv.reader(lines)
    head = next(reader, None)
    if not head or head[:2] != ["fragment_id", "t_litho"]:
        raise DataError(f"{path}: expected header starting fragment_id,t_litho")
    dim = len(head) - 2
    ids, t, rows = [], [], []
    for n, row in enumerate(reader, 2):
        if len(row) != dim + 2:
            raise DataError(f"{path}: record {n} has {len(row)} fields, expected {dim + 2}")
        try:
            ids.append(int(row[0]))
            t.append(int(row[1]))
            rows.append([float(v) for v in row[2:]])
        except ValueError as exc:
            raise DataError(f"{path}: record {n}: {exc}") from exc
        if t[-1] not in (-1, 1):
            raise DataError(f"{path}: record {n}: t_litho must be -1 or 1")
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)
    return np.asarray(ids, dtype=np.int64), np.asarray(t, dtype=np.float64), X
