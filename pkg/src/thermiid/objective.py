"""Loss terms of the decomposition objective and their analytic gradients.

Every term returns ``(value, gradients)``; gradients are taken with respect
to the decoded albedo / shading fields.  The solver chains them through the
parameter decoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .imagecore import gradient, gradient_adjoint
from .ordinality import EdgeLabel, PairLabel, PointPairSet


@dataclass
class LossWeights:
    lambda_edge: float = 1.0
    lambda_ord: float = 1.0
    lambda_nonneg: float = 10.0
    margin: float = 0.01
    lambda_recon: float = 1.0

    def __post_init__(self):
        for name in ("lambda_edge", "lambda_ord", "lambda_nonneg", "lambda_recon"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidInputError(f"{name} must be finite and >= 0, got {v}")
        if not (math.isfinite(self.margin) and self.margin > 0):
            raise InvalidInputError(f"margin must be > 0, got {self.margin}")


@dataclass
class ObjectiveData:
    """Everything the objective needs besides the current estimate."""

    visible: np.ndarray  # (H, W, k)
    edge_labels: np.ndarray  # (H, W) EdgeLabel codes
    pairs: PointPairSet
    z_shading: float = 1.0
    z_albedo: float = 1.0


@dataclass
class LossReport:
    total: float
    recon: float
    edge: float
    ordinal: float
    nonneg: float
    grad_albedo: np.ndarray = field(repr=False)
    grad_shading: np.ndarray = field(repr=False)

    @property
    def gradient(self) -> np.ndarray:
        return np.concatenate([self.grad_albedo.ravel(), self.grad_shading.ravel()])

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("total", "recon", "edge", "ordinal", "nonneg")}


def _match(a, b, what):
    if a.shape[:2] != b.shape[:2]:
        raise InvalidInputError(f"{what}: spatial sizes {a.shape[:2]} and {b.shape[:2]} differ")


# per-element contributions; each loss is the plain sum of its elements


def _recon_elems(resid, n):
    return resid * resid / n


def _edge_elems(wax, way, wsx, wsy, n):
    return (wax * wax + way * way + wsx * wsx + wsy * wsy) / n


def _hinge_elems(args, n):
    return np.where(args > 0, args, 0.0) / n


def _nonneg_elems(neg, n):
    return neg * neg / n


def recon_loss(albedo, shading, visible):
    """Mean squared residual of ``albedo * shading`` against the visible image."""
    _match(albedo, shading, "recon_loss")
    _match(albedo, visible, "recon_loss")
    if albedo.shape != visible.shape:
        raise InvalidInputError(f"recon_loss: albedo {albedo.shape} vs visible {visible.shape}")
    n = albedo.size
    resid = albedo * shading[..., None] - visible
    loss = float(np.sum(_recon_elems(resid, n)))
    g_albedo = 2.0 * resid * shading[..., None] / n
    g_shading = np.sum(2.0 * resid * albedo, axis=2) / n
    return loss, (g_albedo, g_shading)


def edge_loss(albedo_gray, shading, labels):
    """Albedo gradient energy on shading edges plus shading gradient energy on albedo edges."""
    _match(albedo_gray, shading, "edge_loss")
    _match(albedo_gray, labels, "edge_loss")
    n = albedo_gray.size
    on_s = labels == EdgeLabel.SHADING
    on_a = labels == EdgeLabel.ALBEDO
    ga = gradient(albedo_gray)
    gs = gradient(shading)
    wax, way = ga.gx * on_s, ga.gy * on_s
    wsx, wsy = gs.gx * on_a, gs.gy * on_a
    loss = np.sum(_edge_elems(wax, way, wsx, wsy, n))
    g_albedo = (2.0 / n) * gradient_adjoint(wax, way)
    g_shading = (2.0 / n) * gradient_adjoint(wsx, wsy)
    return float(loss), (g_albedo, g_shading)


def hinge_arguments(albedo_gray, shading, pairs: PointPairSet, margin, z_albedo=1.0, z_shading=1.0):
    """Per-pair hinge argument; the pair is penalized where it is positive.

    Returns ``(args, code, sign)``: ``code`` is 0 for None pairs (argument
    ``-inf``), 1 for shading pairs and 2 for albedo pairs; ``sign`` is the
    direction the label demands for ``field[i] - field[j]``.
    """
    labels = pairs.labels
    if np.any(labels == PairLabel.UNSET):
        raise InvalidInputError("ordinal loss received pairs without labels")
    iy, ix = pairs.i[:, 0], pairs.i[:, 1]
    jy, jx = pairs.j[:, 0], pairs.j[:, 1]
    ds = (shading[iy, ix] - shading[jy, jx]) / z_shading
    da = (albedo_gray[iy, ix] - albedo_gray[jy, jx]) / z_albedo
    # sign of the difference the label demands (i minus j)
    sign = np.zeros(len(labels))
    sign[(labels == PairLabel.SPLUS) | (labels == PairLabel.APLUS)] = 1.0
    sign[(labels == PairLabel.SMINUS) | (labels == PairLabel.AMINUS)] = -1.0
    is_s = (labels == PairLabel.SPLUS) | (labels == PairLabel.SMINUS)
    is_a = (labels == PairLabel.APLUS) | (labels == PairLabel.AMINUS)
    diff = np.where(is_s, ds, da)
    args = np.where(is_s | is_a, margin - sign * diff, -np.inf)
    code = np.where(is_s, 1, np.where(is_a, 2, 0))
    return args, code, sign


def ordinal_loss(albedo_gray, shading, pairs: PointPairSet, weights: LossWeights, z_albedo=1.0, z_shading=1.0):
    """Hinge loss on normalized pair differences, averaged over all pairs."""
    _match(albedo_gray, shading, "ordinal_loss")
    if not (z_albedo > 0 and z_shading > 0):
        raise InvalidInputError("normalizers must be positive")
    g_albedo = np.zeros_like(albedo_gray)
    g_shading = np.zeros_like(shading)
    n = len(pairs)
    if n == 0:
        return 0.0, (g_albedo, g_shading)
    args, code, sign = hinge_arguments(albedo_gray, shading, pairs, weights.margin, z_albedo, z_shading)
    active = args > 0
    loss = float(np.sum(_hinge_elems(args, n)))

    h, w = shading.shape
    flat_i = pairs.i[:, 0] * w + pairs.i[:, 1]
    flat_j = pairs.j[:, 0] * w + pairs.j[:, 1]
    # d(arg)/d(field_i) = -sign/z, d(arg)/d(field_j) = +sign/z
    for which, z, out in ((1, z_shading, g_shading), (2, z_albedo, g_albedo)):
        sel = active & (code == which)
        if not np.any(sel):
            continue
        coef = sign[sel] / (z * n)
        acc = np.bincount(flat_i[sel], weights=-coef, minlength=h * w)
        acc += np.bincount(flat_j[sel], weights=coef, minlength=h * w)
        out += acc.reshape(h, w)
    return loss, (g_albedo, g_shading)


def nonneg_penalty(shading):
    """Mean squared hinge on negative shading."""
    neg = np.maximum(-shading, 0.0)
    n = shading.size
    return float(np.sum(_nonneg_elems(neg, n))), -2.0 * neg / n


def total_objective(albedo, shading, data: ObjectiveData, weights: LossWeights) -> LossReport:
    """Weighted sum of all terms with gradients w.r.t. k-channel albedo and shading.

    The edge and ordinal terms see the channel-mean albedo, so their albedo
    gradient is spread evenly (factor 1/k) over the channels.
    """
    if albedo.ndim != 3:
        raise InvalidInputError("albedo must be (H, W, k)")
    k = albedo.shape[2]
    albedo_gray = albedo.mean(axis=2)

    recon, (gr_a, gr_s) = recon_loss(albedo, shading, data.visible)
    edge, (ge_a, ge_s) = edge_loss(albedo_gray, shading, data.edge_labels)
    ordl, (go_a, go_s) = ordinal_loss(albedo_gray, shading, data.pairs, weights, data.z_albedo, data.z_shading)
    nonneg, gn_s = nonneg_penalty(shading)

    lr, le, lo, ln = weights.lambda_recon, weights.lambda_edge, weights.lambda_ord, weights.lambda_nonneg
    total = lr * recon + le * edge + lo * ordl + ln * nonneg
    gray_grad = le * ge_a + lo * go_a
    grad_albedo = lr * gr_a + (gray_grad / k)[..., None]
    grad_shading = lr * gr_s + le * ge_s + lo * go_s + ln * gn_s
    return LossReport(total, recon, edge, ordl, nonneg, grad_albedo, grad_shading)


def objective_terms(albedo, shading, data: ObjectiveData, weights: LossWeights) -> np.ndarray:
    """Weighted per-element contributions whose sum is the total objective.

    Lets a caller difference two nearby objective values element by element,
    so terms a perturbation does not touch cancel exactly.
    """
    albedo_gray = albedo.mean(axis=2)
    resid = albedo * shading[..., None] - data.visible
    ga, gs = gradient(albedo_gray), gradient(shading)
    on_s = data.edge_labels == EdgeLabel.SHADING
    on_a = data.edge_labels == EdgeLabel.ALBEDO
    edge = _edge_elems(ga.gx * on_s, ga.gy * on_s, gs.gx * on_a, gs.gy * on_a, albedo_gray.size)
    parts = [
        weights.lambda_recon * _recon_elems(resid, albedo.size).ravel(),
        weights.lambda_edge * edge.ravel(),
        weights.lambda_nonneg * _nonneg_elems(np.maximum(-shading, 0.0), shading.size).ravel(),
    ]
    if data.pairs is not None and len(data.pairs):
        args, _, _ = hinge_arguments(albedo_gray, shading, data.pairs, weights.margin, data.z_albedo, data.z_shading)
        parts.append(weights.lambda_ord * _hinge_elems(args, len(data.pairs)))
    return np.concatenate(parts)
