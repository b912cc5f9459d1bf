"""Evaluation against simulator ground truth."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .imagecore import gradient
from .ordinality import EdgeLabel, PairLabel, PointPairSet
from .simulate import SceneTruth

NO_LABELED_PAIRS = "no labeled pairs"
DOMINANCE_RATIO = 4.0
EDGE_CLASSES = (EdgeLabel.ALBEDO, EdgeLabel.SHADING, EdgeLabel.NONE)


def _pair(estimate, truth):
    e = np.asarray(estimate, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if e.shape != t.shape:
        raise InvalidInputError(f"estimate {e.shape} and truth {t.shape} differ in shape")
    return e, t


def optimal_scale(estimate, truth) -> float:
    """Least-squares scale mapping ``estimate`` onto ``truth``; 0 for an all-zero estimate."""
    e, t = _pair(estimate, truth)
    ee = float(np.sum(e * e))
    return float(np.sum(e * t)) / ee if ee > 0 else 0.0


def si_mse(estimate, truth) -> float:
    """Mean squared error after fitting one global scale to the estimate."""
    e, t = _pair(estimate, truth)
    if not np.any(t):
        raise InvalidInputError("truth is identically zero")
    r = optimal_scale(e, t) * e - t
    return float(np.mean(r * r))


def mse(estimate, truth) -> float:
    e, t = _pair(estimate, truth)
    return float(np.mean((e - t) ** 2))


# -- ordinal labels -----------------------------------------------------------


@dataclass
class OrdinalAccuracy:
    correct: dict = field(default_factory=lambda: {"A": 0, "S": 0})
    total: dict = field(default_factory=lambda: {"A": 0, "S": 0})

    @staticmethod
    def _frac(c, n):
        return c / n if n else None

    @property
    def overall(self):
        return self._frac(sum(self.correct.values()), sum(self.total.values()))

    @property
    def albedo(self):
        return self._frac(self.correct["A"], self.total["A"])

    @property
    def shading(self):
        return self._frac(self.correct["S"], self.total["S"])

    def to_dict(self) -> dict:
        if self.overall is None:
            return {"status": NO_LABELED_PAIRS, "n_albedo": 0, "n_shading": 0}
        return {
            "overall": self.overall,
            "albedo": self.albedo,
            "shading": self.shading,
            "n_albedo": self.total["A"],
            "n_shading": self.total["S"],
        }


def ordinal_accuracy(pairs: PointPairSet, truth: SceneTruth) -> OrdinalAccuracy:
    """Fraction of non-None labels whose ordering claim holds in the ground truth.

    A± labels are checked against the channel-mean albedo, S± labels against
    the shading.  A tie in the ground truth makes any strict claim wrong.
    """
    h, w = truth.shape
    out = OrdinalAccuracy()
    if len(pairs) == 0:
        return out
    for coords in (pairs.i, pairs.j):
        if coords.min() < 0 or np.any(coords[:, 0] >= h) or np.any(coords[:, 1] >= w):
            raise InvalidInputError("pairs do not fit the truth grid")
    labels = pairs.labels
    rho = truth.mean_albedo
    eta = truth.shading
    claims = {
        "A": (rho, PairLabel.APLUS, PairLabel.AMINUS),
        "S": (eta, PairLabel.SPLUS, PairLabel.SMINUS),
    }
    for key, (fld, plus, minus) in claims.items():
        sel = (labels == plus) | (labels == minus)
        if not np.any(sel):
            continue
        i, j = pairs.i[sel], pairs.j[sel]
        diff = fld[i[:, 0], i[:, 1]] - fld[j[:, 0], j[:, 1]]
        want = np.where(labels[sel] == plus, 1.0, -1.0)
        out.correct[key] = int(np.sum(np.sign(diff) == want))
        out.total[key] = int(sel.sum())
    return out


# -- edge labels --------------------------------------------------------------


def edge_truth(truth: SceneTruth, mag_threshold: float, ratio: float = DOMINANCE_RATIO) -> np.ndarray:
    """Per-pixel true edge class; -1 marks Mixed pixels where neither term dominates."""
    rho = truth.mean_albedo
    eta = truth.shading
    a = gradient(rho).magnitude * eta * truth.gain
    s = rho * gradient(eta).magnitude * truth.gain
    out = np.full(rho.shape, -1, dtype=np.int8)
    out[a > ratio * s] = EdgeLabel.ALBEDO
    out[s > ratio * a] = EdgeLabel.SHADING
    out[a + s <= mag_threshold] = EdgeLabel.NONE
    return out


@dataclass
class EdgeConfusion:
    """Rows are true classes, columns predicted, both in Albedo, Shading, None order."""

    matrix: np.ndarray
    mixed: int

    @property
    def total(self) -> int:
        return int(self.matrix.sum()) + self.mixed

    @property
    def accuracy(self):
        """Correct fraction over pixels with a non-None prediction."""
        m = self.matrix
        n = int(m[:, :2].sum())
        return (int(m[0, 0]) + int(m[1, 1])) / n if n else None

    def to_dict(self) -> dict:
        names = [c.name for c in EDGE_CLASSES]
        return {
            "classes": names,
            "matrix": self.matrix.tolist(),
            "mixed": self.mixed,
            "accuracy": self.accuracy,
        }


def edge_accuracy(labels, truth: SceneTruth, mag_threshold: float) -> EdgeConfusion:
    labels = np.asarray(labels)
    if labels.shape != truth.shape:
        raise InvalidInputError(f"labels {labels.shape} and truth {truth.shape} differ in size")
    gt = edge_truth(truth, mag_threshold)
    m = np.zeros((3, 3), dtype=np.int64)
    for r, tc in enumerate(EDGE_CLASSES):
        rows = gt == tc
        for c, pc in enumerate(EDGE_CLASSES):
            m[r, c] = int(np.sum(rows & (labels == pc)))
    return EdgeConfusion(m, int(np.sum(gt == -1)))


# -- reports ------------------------------------------------------------------


@dataclass
class EvalReport:
    si_mse_albedo: float
    si_mse_shading: float
    ordinal: OrdinalAccuracy | None = None
    edges: EdgeConfusion | None = None
    name: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "si_mse_albedo": self.si_mse_albedo,
            "si_mse_shading": self.si_mse_shading,
            "ordinal_accuracy": self.ordinal.to_dict() if self.ordinal else None,
            "edge_confusion": self.edges.to_dict() if self.edges else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    CSV_FIELDS = ("name", "si_mse_albedo", "si_mse_shading", "ordinal_overall", "edge_accuracy")

    def csv_row(self) -> dict:
        return {
            "name": self.name,
            "si_mse_albedo": repr(self.si_mse_albedo),
            "si_mse_shading": repr(self.si_mse_shading),
            "ordinal_overall": "" if self.ordinal is None or self.ordinal.overall is None else repr(self.ordinal.overall),
            "edge_accuracy": "" if self.edges is None or self.edges.accuracy is None else repr(self.edges.accuracy),
        }


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=EvalReport.CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def evaluate(albedo, shading, truth: SceneTruth, pairs=None, edge_labels=None, mag_threshold=0.05, name="") -> EvalReport:
    """Score an estimate; albedo is compared channel-wise when channel counts agree."""
    a = np.asarray(albedo, dtype=np.float64)
    if a.ndim == 2:
        a = a[..., None]
    ta = truth.albedo if a.shape[2] == truth.albedo.shape[2] else truth.mean_albedo[..., None]
    if a.shape[2] != ta.shape[2]:
        a = a.mean(axis=2, keepdims=True)
    return EvalReport(
        si_mse(a, ta),
        si_mse(shading, truth.shading),
        ordinal_accuracy(pairs, truth) if pairs is not None else None,
        edge_accuracy(edge_labels, truth, mag_threshold) if edge_labels is not None else None,
        name,
    )
