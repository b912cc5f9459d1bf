"""Self-supervision from a visible/thermal pair: edge classes and point-pair ordinals.

Reflectance changes move visible and thermal intensity in opposite directions
(light that is not reflected is absorbed), while shading changes move both the
same way.  Edges are classified from the signed cosine between the two image
gradients; point pairs from the signs of the two intensity differences.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .imagecore import as_image, gaussian_blur, gradient, percentile_range
from .simulate import make_rng


class EdgeLabel(enum.IntEnum):
    NONE = 0
    ALBEDO = 1
    SHADING = 2


class PairLabel(enum.IntEnum):
    UNSET = -1
    NONE = 0
    SPLUS = 1
    SMINUS = 2
    APLUS = 3
    AMINUS = 4

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]

    @classmethod
    def from_symbol(cls, s: str) -> "PairLabel":
        try:
            return _FROM_SYMBOL[s]
        except KeyError:
            raise InvalidInputError(f"unknown pair label {s!r}") from None


_SYMBOLS = {
    PairLabel.UNSET: "unset",
    PairLabel.NONE: "None",
    PairLabel.SPLUS: "S+",
    PairLabel.SMINUS: "S-",
    PairLabel.APLUS: "A+",
    PairLabel.AMINUS: "A-",
}
_FROM_SYMBOL = {v: k for k, v in _SYMBOLS.items()}

# label seen from the other end of the pair
SWAPPED = {
    PairLabel.UNSET: PairLabel.UNSET,
    PairLabel.NONE: PairLabel.NONE,
    PairLabel.SPLUS: PairLabel.SMINUS,
    PairLabel.SMINUS: PairLabel.SPLUS,
    PairLabel.APLUS: PairLabel.AMINUS,
    PairLabel.AMINUS: PairLabel.APLUS,
}


@dataclass
class EdgeClassifierConfig:
    mag_threshold: float = 0.05
    cos_threshold: float = 0.5
    thermal_blur_sigma: float = 2.0

    def __post_init__(self):
        if not self.mag_threshold > 0:
            raise InvalidInputError("mag_threshold must be > 0")
        if not 0 < self.cos_threshold < 1:
            raise InvalidInputError("cos_threshold must be in (0, 1)")
        if self.thermal_blur_sigma < 0:
            raise InvalidInputError("thermal_blur_sigma must be >= 0")


@dataclass
class PairClassifierConfig:
    """Thresholds for pair labels.  ``None`` normalizers are derived from the images."""

    diff_threshold: float = 0.05
    z_visible: float | None = None
    z_thermal: float | None = None

    def __post_init__(self):
        if not self.diff_threshold > 0:
            raise InvalidInputError("diff_threshold must be > 0")
        for name in ("z_visible", "z_thermal"):
            z = getattr(self, name)
            if z is not None and not z > 0:
                raise InvalidInputError(f"{name} must be > 0")

    def resolved(self, vis_gray, thermal) -> "PairClassifierConfig":
        return PairClassifierConfig(
            self.diff_threshold,
            self.z_visible if self.z_visible is not None else percentile_range(vis_gray),
            self.z_thermal if self.z_thermal is not None else percentile_range(thermal),
        )


@dataclass(frozen=True)
class PointPair:
    i: tuple
    j: tuple
    label: PairLabel = PairLabel.UNSET
    delta_v: float = 0.0
    delta_t: float = 0.0


@dataclass
class PointPairSet:
    """Pixel pairs as parallel arrays; coordinates are (row, col)."""

    i: np.ndarray
    j: np.ndarray
    labels: np.ndarray
    delta_v: np.ndarray
    delta_t: np.ndarray

    @classmethod
    def empty(cls) -> "PointPairSet":
        z = np.zeros((0, 2), dtype=np.int64)
        f = np.zeros(0)
        return cls(z, z.copy(), np.zeros(0, dtype=np.int8), f, f.copy())

    @classmethod
    def from_pairs(cls, pairs) -> "PointPairSet":
        pairs = list(pairs)
        if not pairs:
            return cls.empty()
        return cls(
            np.array([p.i for p in pairs], dtype=np.int64).reshape(-1, 2),
            np.array([p.j for p in pairs], dtype=np.int64).reshape(-1, 2),
            np.array([int(p.label) for p in pairs], dtype=np.int8),
            np.array([p.delta_v for p in pairs], dtype=np.float64),
            np.array([p.delta_t for p in pairs], dtype=np.float64),
        )

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        for n in range(len(self)):
            yield self[n]

    def __getitem__(self, n) -> PointPair:
        return PointPair(
            tuple(int(v) for v in self.i[n]),
            tuple(int(v) for v in self.j[n]),
            PairLabel(int(self.labels[n])),
            float(self.delta_v[n]),
            float(self.delta_t[n]),
        )

    def subset(self, index) -> "PointPairSet":
        return PointPairSet(self.i[index], self.j[index], self.labels[index], self.delta_v[index], self.delta_t[index])

    def swapped(self) -> "PointPairSet":
        lut = np.array([SWAPPED[PairLabel(c)] for c in range(-1, 5)], dtype=np.int8)
        return PointPairSet(self.j.copy(), self.i.copy(), lut[self.labels + 1], -self.delta_v, -self.delta_t)

    def counts(self) -> dict:
        return {PairLabel(c).symbol: int(np.sum(self.labels == c)) for c in range(-1, 5) if np.any(self.labels == c)}


def _check_same_size(vis_gray, thermal):
    v = as_image(vis_gray, "visible")
    t = as_image(thermal, "thermal")
    if v.ndim != 2 or t.ndim != 2:
        raise InvalidInputError("visible and thermal inputs must be single-channel (H, W) arrays")
    if v.shape != t.shape:
        raise InvalidInputError(f"visible {v.shape} and thermal {t.shape} differ in size")
    return v, t


def classify_edges(vis_gray, thermal, cfg: EdgeClassifierConfig | None = None) -> np.ndarray:
    """Per-pixel edge class (an :class:`EdgeLabel` code array).

    A pixel with enough visible gradient is an albedo edge when the visible
    and blurred thermal gradients point in opposite directions (cosine below
    ``-cos_threshold``) and a shading edge when they agree (above
    ``+cos_threshold``).
    """
    cfg = cfg or EdgeClassifierConfig()
    v, t = _check_same_size(vis_gray, thermal)
    gv = gradient(v)
    gt = gradient(gaussian_blur(t, cfg.thermal_blur_sigma))
    mag_v = gv.magnitude
    mag_t = gt.magnitude
    dot = gv.gx * gt.gx + gv.gy * gt.gy
    denom = mag_v * mag_t
    cos = np.divide(dot, denom, out=np.zeros_like(dot), where=denom > 0)

    labels = np.full(v.shape, EdgeLabel.NONE, dtype=np.int8)
    strong = mag_v > cfg.mag_threshold
    labels[strong & (cos < -cfg.cos_threshold)] = EdgeLabel.ALBEDO
    labels[strong & (cos > cfg.cos_threshold)] = EdgeLabel.SHADING
    return labels


def default_pair_radius(height: int, width: int) -> float:
    return max(4.0, min(height, width) / 32.0)


def poisson_disk_points(height: int, width: int, radius: float, rng, attempts: int = 30) -> np.ndarray:
    """Bridson dart throwing on the pixel lattice.

    Candidates are snapped to integer pixels before the distance test, so the
    returned (row, col) points are at least ``radius`` apart.
    """
    cell = radius / math.sqrt(2.0)
    gh = int(math.ceil(height / cell))
    gw = int(math.ceil(width / cell))
    grid = -np.ones((gh, gw), dtype=np.int64)
    points: list[tuple[int, int]] = []
    r2 = radius * radius

    def fits(p):
        gy, gx = int(p[0] / cell), int(p[1] / cell)
        for yy in range(max(gy - 2, 0), min(gy + 3, gh)):
            for xx in range(max(gx - 2, 0), min(gx + 3, gw)):
                q = grid[yy, xx]
                if q >= 0:
                    dy = points[q][0] - p[0]
                    dx = points[q][1] - p[1]
                    if dy * dy + dx * dx < r2:
                        return False
        return True

    def add(p):
        grid[int(p[0] / cell), int(p[1] / cell)] = len(points)
        points.append(p)
        active.append(p)

    active: list[tuple[int, int]] = []
    add((int(rng.integers(0, height)), int(rng.integers(0, width))))
    while active:
        k = int(rng.integers(0, len(active)))
        qy, qx = active[k]
        draws = rng.random((attempts, 2))
        for u, a in draws:
            d = radius * math.sqrt(1.0 + 3.0 * u)  # area-uniform in [r, 2r]
            ang = 2.0 * math.pi * a
            py = int(math.floor(qy + d * math.sin(ang)))
            px = int(math.floor(qx + d * math.cos(ang)))
            if 0 <= py < height and 0 <= px < width and fits((py, px)):
                add((py, px))
                break
        else:
            active[k] = active[-1]
            active.pop()
    return np.array(points, dtype=np.int64).reshape(-1, 2)


def _reflect(x: float, n: int) -> float:
    hi = n - 1
    while x < 0 or x > hi:
        x = -x if x < 0 else 2 * hi - x
    return x


def sample_point_pairs(height: int, width: int, radius: float, seed, max_pairs: int | None = None) -> PointPairSet:
    """Poisson-disk anchors, each paired with a partner in the annulus [r, 3r].

    Partners that land outside the image are reflected back across the
    violated border.  Labels are left unset.
    """
    if radius < 2:
        raise InvalidInputError(f"radius must be >= 2, got {radius}")
    if height < 2 * radius or width < 2 * radius:
        raise InvalidInputError(f"image {height}x{width} too small for radius {radius}")
    rng = make_rng(seed)
    anchors = poisson_disk_points(height, width, radius, rng)
    partners = np.empty_like(anchors)
    for n, (ay, ax) in enumerate(anchors):
        while True:
            d = rng.uniform(radius, 3 * radius)
            ang = rng.uniform(0, 2 * math.pi)
            py = int(round(_reflect(ay + d * math.sin(ang), height)))
            px = int(round(_reflect(ax + d * math.cos(ang), width)))
            if (py, px) != (ay, ax):
                break
        partners[n] = (py, px)
    if max_pairs is not None:
        anchors = anchors[:max_pairs]
        partners = partners[:max_pairs]
    n = len(anchors)
    return PointPairSet(anchors, partners, np.full(n, PairLabel.UNSET, dtype=np.int8), np.zeros(n), np.zeros(n))


def label_from_deltas(delta_v, delta_t, threshold):
    delta_v = np.asarray(delta_v, dtype=np.float64)
    delta_t = np.asarray(delta_t, dtype=np.float64)
    vp, vm = delta_v > threshold, delta_v < -threshold
    tp, tm = delta_t > threshold, delta_t < -threshold
    labels = np.full(delta_v.shape, PairLabel.NONE, dtype=np.int8)
    labels[vp & tp] = PairLabel.SPLUS
    labels[vm & tm] = PairLabel.SMINUS
    labels[vp & tm] = PairLabel.APLUS
    labels[vm & tp] = PairLabel.AMINUS
    return labels


def classify_pairs(vis_gray, thermal, pairs: PointPairSet, cfg: PairClassifierConfig | None = None) -> PointPairSet:
    """Label every pair from the signs of its normalized visible/thermal differences."""
    v, t = _check_same_size(vis_gray, thermal)
    cfg = cfg or PairClassifierConfig()
    if cfg.z_visible is None or cfg.z_thermal is None:
        cfg = cfg.resolved(v, t)
    h, w = v.shape
    for coords in (pairs.i, pairs.j):
        if len(coords) and (coords.min() < 0 or np.any(coords[:, 0] >= h) or np.any(coords[:, 1] >= w)):
            raise InvalidInputError("point pair coordinates out of bounds")
    iy, ix = pairs.i[:, 0], pairs.i[:, 1]
    jy, jx = pairs.j[:, 0], pairs.j[:, 1]
    delta_v = (v[iy, ix] - v[jy, jx]) / cfg.z_visible
    delta_t = (t[iy, ix] - t[jy, jx]) / cfg.z_thermal
    labels = label_from_deltas(delta_v, delta_t, cfg.diff_threshold)
    return PointPairSet(pairs.i.copy(), pairs.j.copy(), labels, delta_v, delta_t)


def classify_pair(vis_gray, thermal, pair: PointPair, cfg: PairClassifierConfig | None = None) -> PointPair:
    return classify_pairs(vis_gray, thermal, PointPairSet.from_pairs([pair]), cfg)[0]


def export_labels(pairs, path) -> None:
    """Write labeled pairs as a JSON array of ``{i, j, label, delta_v, delta_t}`` records."""
    records = [
        {
            "i": list(p.i),
            "j": list(p.j),
            "label": p.label.symbol,
            "delta_v": p.delta_v,
            "delta_t": p.delta_t,
        }
        for p in pairs
    ]
    Path(path).write_text(json.dumps(records, indent=1) if records else "[]")


def load_labels(path) -> PointPairSet:
    records = json.loads(Path(path).read_text())
    return PointPairSet.from_pairs(
        PointPair(tuple(r["i"]), tuple(r["j"]), PairLabel.from_symbol(r["label"]), float(r["delta_v"]), float(r["delta_t"]))
        for r in records
    )
