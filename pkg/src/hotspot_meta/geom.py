"""Rectilinear layouts, a seeded layout generator and edge fragmentation.

All coordinates are integer nanometres. A fragment is a contiguous piece of
one rectangle edge; it is the unit every classifier labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .config import PRNG_NAME, GenConfig
from .errors import DataError, PlacementError

LAYOUT_MAGIC = "LAYOUT"
LAYOUT_VERSION = "v1"


@dataclass(frozen=True, slots=True)
class Rect:
    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise DataError(f"degenerate rect {self.as_tuple()}")
        if self.x1 < 0 or self.y1 < 0:
            raise DataError(f"negative coordinate in rect {self.as_tuple()}")

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def perimeter(self) -> int:
        return 2 * (self.width + self.height)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)


def rect_gap(a: Rect, b: Rect) -> int:
    """Projection gap between two rects; negative when interiors overlap.

    Two rects respect spacing ``s`` iff ``rect_gap >= s``.
    """
    dx = max(a.x1 - b.x2, b.x1 - a.x2)
    dy = max(a.y1 - b.y2, b.y1 - a.y2)
    return max(dx, dy)


class RectIndex:
    """Uniform bucket grid over rect bounding boxes for neighbourhood queries."""

    def __init__(self, rects, bucket: int = 1000):
        self.bucket = bucket
        self._cells: dict[tuple[int, int], list[int]] = {}
        self._rects: list[tuple[int, int, int, int]] = []
        for r in rects:
            self.add(r)

    def _span(self, x1, y1, x2, y2):
        b = self.bucket
        return range(x1 // b, x2 // b + 1), range(y1 // b, y2 // b + 1)

    def add(self, rect: Rect | tuple) -> int:
        t = rect.as_tuple() if isinstance(rect, Rect) else tuple(rect)
        idx = len(self._rects)
        self._rects.append(t)
        xs, ys = self._span(*t)
        for gx in xs:
            for gy in ys:
                self._cells.setdefault((gx, gy), []).append(idx)
        return idx

    def query(self, x1, y1, x2, y2) -> list[int]:
        """Sorted indices of rects whose closed box intersects the query box."""
        found = set()
        xs, ys = self._span(int(np.floor(x1)), int(np.floor(y1)), int(np.floor(x2)), int(np.floor(y2)))
        for gx in xs:
            for gy in ys:
                for idx in self._cells.get((gx, gy), ()):
                    rx1, ry1, rx2, ry2 = self._rects[idx]
                    if rx1 <= x2 and x1 <= rx2 and ry1 <= y2 and y1 <= ry2:
                        found.add(idx)
        return sorted(found)


@dataclass(frozen=True)
class Layout:
    rects: tuple[Rect, ...]
    width: int
    height: int
    seed: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DataError(f"layout dimensions must be positive, got {self.width}x{self.height}")
        object.__setattr__(self, "rects", tuple(self.rects))
        for r in self.rects:
            if r.x2 > self.width or r.y2 > self.height:
                raise DataError(f"rect {r.as_tuple()} outside {self.width}x{self.height} layout")
        index = self.index
        for i, r in enumerate(self.rects):
            for j in index.query(r.x1, r.y1, r.x2, r.y2):
                if j > i and rect_gap(r, self.rects[j]) < 0:
                    raise DataError(f"rects {i} and {j} overlap")

    @cached_property
    def index(self) -> RectIndex:
        return RectIndex(self.rects)

    @cached_property
    def rect_array(self) -> np.ndarray:
        """``(n, 4)`` float64 array of ``x1, y1, x2, y2``."""
        if not self.rects:
            return np.zeros((0, 4), dtype=np.float64)
        return np.ascontiguousarray([r.as_tuple() for r in self.rects], dtype=np.float64)

    @cached_property
    def rect_array_int(self) -> np.ndarray:
        if not self.rects:
            return np.zeros((0, 4), dtype=np.int64)
        return np.ascontiguousarray([r.as_tuple() for r in self.rects], dtype=np.int64)

    def neighbours(self, x1, y1, x2, y2) -> list[int]:
        return self.index.query(x1, y1, x2, y2)


@dataclass(frozen=True, slots=True)
class Fragment:
    id: int
    center: tuple[float, float]
    orientation: str  # "horizontal" edge runs along x, "vertical" along y
    normal: tuple[int, int]
    owner: int  # index into Layout.rects
    owner_rect: Rect = field(repr=False)
    length: int = 0

    def __post_init__(self):
        if self.length <= 0:
            raise DataError(f"fragment {self.id} has non-positive length")


# --- generation -------------------------------------------------------------


def _draw_dim(rng, lo, hi, quantum):
    """Dimension quantum*k + r with r <= quantum//2, so fragment ends stay long."""
    k_lo = max(1, -(-lo // quantum))
    k_hi = max(k_lo, hi // quantum)
    k = int(rng.integers(k_lo, k_hi + 1))
    dim = k * quantum + int(rng.integers(0, quantum // 2 + 1))
    return dim if dim <= max(hi, k * quantum) else k * quantum


def _motif(rng, cfg: GenConfig):
    """Rects of one risk motif, relative to the origin, at exact min spacing."""
    q, s = cfg.dim_quantum, cfg.min_spacing
    kind = int(rng.integers(0, 3))
    out = []
    if kind == 0:
        # parallel line pair
        length = _draw_dim(rng, 4 * q, 8 * q, q)
        w1 = _draw_dim(rng, q, q, q)
        w2 = _draw_dim(rng, q, 2 * q, q)
        shift = int(rng.integers(0, 2 * q + 1))
        out = [(0, 0, length, w1), (shift, w1 + s, shift + length, w1 + s + w2)]
    elif kind == 1:
        # facing line ends
        w = _draw_dim(rng, q, q, q)
        l1 = _draw_dim(rng, 3 * q, 6 * q, q)
        l2 = _draw_dim(rng, 3 * q, 6 * q, q)
        out = [(0, 0, l1, w), (l1 + s, 0, l1 + s + l2, w)]
    else:
        # three-line comb
        y = 0
        for _ in range(3):
            length = _draw_dim(rng, 3 * q, 7 * q, q)
            w = _draw_dim(rng, q, 2 * q, q)
            x0 = int(rng.integers(0, q + 1))
            out.append((x0, y, x0 + length, y + w))
            y += w + s
    if rng.integers(0, 2):
        out = [(y1, x1, y2, x2) for x1, y1, x2, y2 in out]
    return out


def _try_place(rng, members, cfg, placed, index):
    bw = max(m[2] for m in members)
    bh = max(m[3] for m in members)
    if bw > cfg.width or bh > cfg.height:
        return False
    s = cfg.min_spacing
    for _ in range(cfg.max_attempts):
        ox = int(rng.integers(0, cfg.width - bw + 1))
        oy = int(rng.integers(0, cfg.height - bh + 1))
        cand = [Rect(x1 + ox, y1 + oy, x2 + ox, y2 + oy) for x1, y1, x2, y2 in members]
        ok = True
        for c in cand:
            for j in index.query(c.x1 - s, c.y1 - s, c.x2 + s, c.y2 + s):
                if rect_gap(c, placed[j]) < s:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            for c in cand:
                placed.append(c)
                index.add(c)
            return True
    return False


def generate_layout(seed: int, config: GenConfig | None = None) -> Layout:
    """Seeded random layout with a sprinkling of minimum-spacing risk motifs.

    Raises PlacementError when ``rect_count`` rects cannot be placed.
    """
    cfg = config or GenConfig()
    if cfg.width <= 0 or cfg.height <= 0 or cfg.min_dim <= 0 or cfg.max_dim < cfg.min_dim:
        raise DataError(f"infeasible generator dimensions in {cfg}")
    if cfg.min_spacing < 0 or cfg.rect_count < 0 or cfg.dim_quantum <= 0:
        raise DataError(f"invalid generator config {cfg}")
    rng = np.random.Generator(np.random.PCG64(seed))
    placed: list[Rect] = []
    index = RectIndex([])
    motif_budget = int(round(cfg.rect_count * cfg.motif_rate))
    failures = 0
    while len(placed) < motif_budget:
        members = _motif(rng, cfg)
        if len(placed) + len(members) > motif_budget:
            break
        if not _try_place(rng, members, cfg, placed, index):
            failures += 1
            if failures > 10:
                raise PlacementError(f"could not place risk motifs after {failures} tries (seed {seed})")
    while len(placed) < cfg.rect_count:
        w = _draw_dim(rng, cfg.min_dim, cfg.max_dim, cfg.dim_quantum)
        h = _draw_dim(rng, cfg.min_dim, cfg.max_dim, cfg.dim_quantum)
        if not _try_place(rng, [(0, 0, w, h)], cfg, placed, index):
            raise PlacementError(
                f"placed {len(placed)} of {cfg.rect_count} rects before giving up "
                f"after {cfg.max_attempts} attempts (seed {seed})"
            )
    return Layout(tuple(placed), cfg.width, cfg.height, seed)


# --- fragmentation ----------------------------------------------------------


def partition_edge(length: int, frag_len: int) -> list[int]:
    """Split an edge into frag_len pieces; a short tail of at most half a
    piece is merged into its neighbour."""
    n, rem = divmod(length, frag_len)
    if n == 0:
        return [length]
    pieces = [frag_len] * n
    if rem == 0:
        return pieces
    if 2 * rem <= frag_len:
        pieces[-1] += rem
    else:
        pieces.append(rem)
    return pieces


def fragment_layout(layout: Layout, frag_len: int = 100) -> list[Fragment]:
    if frag_len <= 0:
        raise DataError(f"frag_len must be positive, got {frag_len}")
    frags: list[Fragment] = []
    for owner, r in enumerate(layout.rects):
        # bottom, right, top, left
        edges = (
            (r.x1, r.y1, 1, 0, (0, -1), r.width, "horizontal"),
            (r.x2, r.y1, 0, 1, (1, 0), r.height, "vertical"),
            (r.x1, r.y2, 1, 0, (0, 1), r.width, "horizontal"),
            (r.x1, r.y1, 0, 1, (-1, 0), r.height, "vertical"),
        )
        for sx, sy, dx, dy, normal, length, orient in edges:
            pos = 0
            for piece in partition_edge(length, frag_len):
                mid = pos + piece / 2
                frags.append(
                    Fragment(
                        id=len(frags),
                        center=(sx + dx * mid, sy + dy * mid),
                        orientation=orient,
                        normal=normal,
                        owner=owner,
                        owner_rect=r,
                        length=piece,
                    )
                )
                pos += piece
    return frags


# --- text format ------------------------------------------------------------


def write_layout(layout: Layout, path, header: list[str] | None = None) -> None:
    lines = [f"{LAYOUT_MAGIC} {LAYOUT_VERSION} {layout.width} {layout.height} {layout.seed}"]
    lines += header or [f"# prng={PRNG_NAME}"]
    lines += [f"RECT {r.x1} {r.y1} {r.x2} {r.y2}" for r in layout.rects]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_layout(path) -> Layout:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read layout {path}: {exc}") from exc
    records = [(n, line.split()) for n, line in enumerate(raw, 1) if line.strip() and not line.startswith("#")]
    if not records:
        raise DataError(f"{path}: empty layout file")
    lineno, head = records[0]
    if len(head) != 5 or head[0] != LAYOUT_MAGIC:
        raise DataError(f"{path}:{lineno}: expected 'LAYOUT v1 width height seed' header")
    if head[1] != LAYOUT_VERSION:
        raise DataError(f"{path}:{lineno}: unsupported layout version {head[1]}")
    try:
        width, height, seed = int(head[2]), int(head[3]), int(head[4])
        rects = []
        for lineno, tok in records[1:]:
            if len(tok) != 5 or tok[0] != "RECT":
                raise DataError(f"{path}:{lineno}: malformed record {' '.join(tok)!r}")
            rects.append(Rect(*(int(t) for t in tok[1:])))
    except ValueError as exc:
        raise DataError(f"{path}:{lineno}: {exc}") from exc
    except DataError as exc:
        raise DataError(f"{path}:{lineno}: {exc}") from exc
    return Layout(tuple(rects), width, height, seed)
