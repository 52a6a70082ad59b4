"""Fuzzy pattern-matching base classifier over quantized density signatures.

A query matches a stored signature when at most ``mismatch_budget`` cells
differ from it by more than ``match_tolerance`` quantization steps. Loose
settings widen coverage at the price of false alarms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .config import PmConfig
from .errors import DataError


@dataclass(frozen=True)
class PmSignature:
    cells: np.ndarray  # int32, values in [0, quant_levels - 1]
    source_count: int = 1


@dataclass(frozen=True)
class PmLibrary:
    signatures: tuple[PmSignature, ...]
    quant_levels: int
    match_tolerance: int
    mismatch_budget: int
    dim: int

    def matrix(self) -> np.ndarray:
        if not self.signatures:
            return np.zeros((0, self.dim), dtype=np.int32)
        return np.ascontiguousarray(np.vstack([s.cells for s in self.signatures]), dtype=np.int32)


def quantize_cells(X, quant_levels: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if quant_levels < 2:
        raise DataError(f"quant_levels must be at least 2, got {quant_levels}")
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise DataError("pattern signatures need raw feature values in [0, 1]")
    return np.minimum(np.floor(X * quant_levels), quant_levels - 1).astype(np.int32)


def pm_signature(v, quant_levels: int = 8) -> PmSignature:
    return PmSignature(quantize_cells(v, quant_levels), 1)


def pm_build_library(hotspot_X, cfg: PmConfig | None = None) -> PmLibrary:
    """Greedy deduplicated library; rows must already be in fragment-id order.

    Each row is absorbed by the first stored signature it matches, otherwise
    it becomes a new signature.
    """
    cfg = cfg or PmConfig()
    X = np.asarray(hotspot_X, dtype=np.float64)
    if X.size == 0:
        return PmLibrary((), cfg.quant_levels, cfg.match_tolerance, cfg.mismatch_budget,
                         X.shape[1] if X.ndim == 2 else 0)
    X = np.atleast_2d(X)
    dim = X.shape[1]
    cells = quantize_cells(X, cfg.quant_levels)
    stored: list[np.ndarray] = []
    counts: list[int] = []
    for row in cells:
        hit = -1
        if stored:
            lib = np.ascontiguousarray(np.vstack(stored), dtype=np.int32)
            # first matching signature, scanning one at a time keeps the order rule
            for k in range(len(stored)):
                if kernels.pm_match(lib[k:k + 1], row[None, :], cfg.match_tolerance, cfg.mismatch_budget)[0] > 0:
                    hit = k
                    break
        if hit >= 0:
            counts[hit] += 1
        else:
            stored.append(row.copy())
            counts.append(1)
    sigs = tuple(PmSignature(c, n) for c, n in zip(stored, counts))
    return PmLibrary(sigs, cfg.quant_levels, cfg.match_tolerance, cfg.mismatch_budget, dim)


def pm_build_from_samples(samples, cfg: PmConfig | None = None) -> PmLibrary:
    """Library from CalibSample hotspots; non-hotspot samples are rejected."""
    samples = sorted(samples, key=lambda s: s.fragment_id)
    if any(s.t_litho != 1 for s in samples):
        raise DataError("pattern library accepts only hotspot samples (t_litho = +1)")
    if not samples:
        return pm_build_library(np.zeros((0, 0)), cfg)
    return pm_build_library(np.vstack([s.features.values for s in samples]), cfg)


def pm_match_batch(library: PmLibrary, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not library.signatures:
        return np.full(X.shape[0], -1.0)
    if X.shape[1] != library.dim:
        raise DataError(f"feature dimension {X.shape[1]} != library dimension {library.dim}")
    q = np.ascontiguousarray(quantize_cells(X, library.quant_levels))
    out = kernels.pm_match(library.matrix(), q, library.match_tolerance, library.mismatch_budget)
    return out.astype(np.float64)


def pm_match(library: PmLibrary, v) -> int:
    return int(pm_match_batch(library, v)[0])
