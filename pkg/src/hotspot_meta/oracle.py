"""Surrogate lithography: Gaussian aerial image, per-fragment EPE, hotspot classes.

The aerial image is the layout's indicator function convolved with a
normalized 2-D Gaussian. Because the Gaussian is separable, each rectangle
contributes a product of two normal-CDF differences, so the image is exact up
to libm ``erfc`` rounding with no sampling grid involved.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .config import OracleConfig
from .errors import DataError
from .geom import Fragment, Layout

# Gaussian tails beyond this many sigmas are below double resolution
INFLUENCE_SIGMAS = 8.0

CLASSES = ("C0", "C1", "NONE")


@dataclass(frozen=True, slots=True)
class EpeResult:
    fragment_id: int
    epe: float  # positive when the printed contour recedes inside the drawn edge
    saturated: bool = False


@dataclass(frozen=True, slots=True)
class HotspotLabel:
    fragment_id: int
    epe: float
    cls: str
    t_litho: int


def _check_config(config: OracleConfig) -> None:
    if not 0.0 < config.intensity_threshold < 1.0:
        raise DataError(f"intensity_threshold must lie in (0, 1), got {config.intensity_threshold}")
    if not 0.0 < config.epe_c1 < config.epe_c0:
        raise DataError(f"need 0 < epe_c1 < epe_c0, got {config.epe_c1}, {config.epe_c0}")
    if not config.sigma > 0.0:
        raise DataError(f"sigma must be positive, got {config.sigma}")


def _local_rects(layout: Layout, x: float, y: float, radius: float) -> np.ndarray:
    idx = layout.neighbours(x - radius, y - radius, x + radius, y + radius)
    return np.ascontiguousarray(layout.rect_array[idx])


def aerial_intensity(layout: Layout, point, config: OracleConfig | None = None) -> float:
    config = config or OracleConfig()
    _check_config(config)
    x, y = float(point[0]), float(point[1])
    if not (0.0 <= x <= layout.width and 0.0 <= y <= layout.height):
        raise DataError(f"point {(x, y)} outside {layout.width}x{layout.height} layout")
    rects = _local_rects(layout, x, y, INFLUENCE_SIGMAS * config.sigma)
    return kernels.intensity(rects, x, y, config.sigma)


def simulate_epe(layout: Layout, fragment: Fragment, config: OracleConfig | None = None) -> EpeResult:
    """EPE at the fragment centre, measured along its outward normal."""
    config = config or OracleConfig()
    _check_config(config)
    if not (0 <= fragment.owner < len(layout.rects)) or layout.rects[fragment.owner] != fragment.owner_rect:
        raise DataError(f"fragment {fragment.id} does not belong to this layout")
    cx, cy = fragment.center
    sigma = config.sigma
    rects = _local_rects(layout, cx, cy, (4.0 + INFLUENCE_SIGMAS) * sigma)
    nx, ny = fragment.normal
    offset, saturated = kernels.epe_offset(
        rects, float(cx), float(cy), float(nx), float(ny), sigma,
        config.intensity_threshold, config.scan_steps, config.sample_step,
    )
    return EpeResult(fragment.id, -offset + 0.0, bool(saturated))


def simulate_all(layout: Layout, fragments, config: OracleConfig | None = None, workers: int = 1) -> list[EpeResult]:
    """EPE for every fragment, in fragment-id order regardless of ``workers``."""
    config = config or OracleConfig()
    fragments = sorted(fragments, key=lambda f: f.id)
    if workers <= 1 or len(fragments) < 2:
        return [simulate_epe(layout, f, config) for f in fragments]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda f: simulate_epe(layout, f, config), fragments, chunksize=64))


def classify_epe(epe: float, config: OracleConfig) -> str:
    mag = abs(epe)
    if mag >= config.epe_c0:
        return "C0"
    if mag >= config.epe_c1:
        return "C1"
    return "NONE"


def label_fragments(epes, config: OracleConfig | None = None, target_class: str = "C0") -> list[HotspotLabel]:
    config = config or OracleConfig()
    _check_config(config)
    if target_class not in ("C0", "C1"):
        raise DataError(f"target_class must be C0 or C1, got {target_class!r}")
    out = []
    for r in sorted(epes, key=lambda e: e.fragment_id):
        if not math.isfinite(r.epe):
            raise DataError(f"non-finite EPE for fragment {r.fragment_id}")
        cls = classify_epe(r.epe, config)
        out.append(HotspotLabel(r.fragment_id, r.epe, cls, 1 if cls == target_class else -1))
    return out


LABEL_COLUMNS = ["fragment_id", "epe_nm", "class", "t_litho"]


def write_labels(labels, path, header: list[str] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header or []:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_COLUMNS)
        for lab in sorted(labels, key=lambda r: r.fragment_id):
            w.writerow([lab.fragment_id, repr(float(lab.epe)), lab.cls, lab.t_litho])


def read_labels(path) -> list[HotspotLabel]:
    try:
        with open(path, encoding="utf-8") as fh:
            rows = [line for line in fh if not line.startswith("#")]
    except OSError as exc:
        raise DataError(f"cannot read labels {path}: {exc}") from exc
    reader = csv.reader(rows)
    head = next(reader, None)
    if head != LABEL_COLUMNS:
        raise DataError(f"{path}: expected header {','.join(LABEL_COLUMNS)}")
    out = []
    for n, row in enumerate(reader, 2):
        try:
            fid, epe, cls, t = row
            if cls not in CLASSES or t not in ("1", "-1"):
                raise ValueError(f"bad class/label {cls!r}/{t!r}")
            out.append(HotspotLabel(int(fid), float(epe), cls, int(t)))
        except ValueError as exc:
            raise DataError(f"{path}: record {n}: {exc}") from exc
    return out
