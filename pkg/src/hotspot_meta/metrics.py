"""Detection metrics: hits, extras, hotspot accuracy, false-alarm ratio and Psi.

False alarms are normalized by the number of actual hotspots ("X times the
real hotspots"), so a ratio of 5.0 means five spurious flags per hotspot.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError

REPORT_COLUMNS = ["theta", "hit", "extra", "actual", "accuracy", "false_alarm_ratio", "psi"]


@dataclass(frozen=True)
class DetectionReport:
    actual_hotspots: int
    hit: int
    extra: int
    accuracy: float
    false_alarm_ratio: float
    psi: float
    theta_used: float = float("nan")
    degenerate: bool = False

    @property
    def miss(self) -> int:
        return self.actual_hotspots - self.hit

    def row(self) -> list:
        return [self.theta_used, self.hit, self.extra, self.actual_hotspots,
                self.accuracy, self.false_alarm_ratio, self.psi]


def _report(hit: int, extra: int, actual: int, psi_alpha: float, psi_beta: float, theta: float) -> DetectionReport:
    if actual > 0:
        accuracy = hit / actual
        ratio = extra / actual
    else:
        accuracy, ratio = 1.0, float(extra)
    return DetectionReport(actual, hit, extra, accuracy, ratio,
                           psi_alpha * accuracy + psi_beta * ratio, theta, actual == 0)


def compute_report(predictions, labels, psi_alpha: float = 1.0, psi_beta: float = -0.02,
                   theta: float = float("nan")) -> DetectionReport:
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    if pred.shape != lab.shape:
        raise DataError(f"{pred.shape[0] if pred.ndim else 0} predictions but {lab.shape[0] if lab.ndim else 0} labels")
    flagged = pred > 0
    hot = lab > 0
    return _report(int(np.sum(flagged & hot)), int(np.sum(flagged & ~hot)), int(np.sum(hot)),
                   psi_alpha, psi_beta, theta)


def sweep_tradeoff(scores, labels, theta_grid, psi_alpha: float = 1.0, psi_beta: float = -0.02) -> list[DetectionReport]:
    """One report per theta (flag when score >= theta), via a single sort."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DataError(f"{scores.shape[0]} scores but {labels.shape[0]} labels")
    theta_grid = np.asarray(theta_grid, dtype=np.float64)
    hot = labels > 0
    hot_sorted = np.sort(scores[hot])
    cold_sorted = np.sort(scores[~hot])
    actual = hot_sorted.shape[0]
    # count of scores >= theta = n - (count strictly below theta)
    hits = actual - np.searchsorted(hot_sorted, theta_grid, side="left")
    extras = cold_sorted.shape[0] - np.searchsorted(cold_sorted, theta_grid, side="left")
    return [_report(int(h), int(e), actual, psi_alpha, psi_beta, float(t))
            for t, h, e in zip(theta_grid, hits, extras)]


def write_report_csv(path, reports, header: list[str] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header or []:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([repr(float(r.theta_used)), r.hit, r.extra, r.actual_hotspots,
                        repr(float(r.accuracy)), repr(float(r.false_alarm_ratio)), repr(float(r.psi))])
