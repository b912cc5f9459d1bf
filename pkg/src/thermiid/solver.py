"""Direct per-pixel optimization of albedo and shading.

Albedo is decoded from unbounded logits through a logistic function; shading
is optimized as-is and kept non-negative by a penalty.  Adam drives the
parameters, and point pairs are redrawn every ``resample_interval`` steps.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SolverError
from .imagecore import as_image, to_grayscale
from .objective import LossReport, LossWeights, ObjectiveData, hinge_arguments, objective_terms, total_objective
from .ordinality import (
    EdgeClassifierConfig,
    EdgeLabel,
    PairClassifierConfig,
    classify_edges,
    classify_pairs,
    PairLabel,
    PointPairSet,
    default_pair_radius,
    sample_point_pairs,
)
from .simulate import make_rng

LOGIT_CLAMP = 12.0
ADAM_EPS = 1e-8

# The per-pixel parameterization has no spatial prior of its own; the edge
# loss only couples pixels that carry a label, so the solver labels nearly
# every pixel with a visible gradient and uses a narrow thermal blur (wide
# blurs leak edge polarity into flat neighbours).
SOLVER_EDGE_DEFAULTS = {"mag_threshold": 1e-4, "cos_threshold": 0.5, "thermal_blur_sigma": 1.0}

# stream ids for splitting one root seed across subsystems
STREAM_INIT = 1
STREAM_PAIRS = 2
STREAM_CHECK = 3


def substream(seed: int, stream: int, index: int = 0) -> list:
    """Seed material for an independent, reproducible random stream."""
    return [int(seed), int(stream), int(index)]


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class IntrinsicEstimate:
    albedo_logits: np.ndarray  # (H, W, k)
    shading_raw: np.ndarray  # (H, W)

    @property
    def albedo(self) -> np.ndarray:
        return sigmoid(np.clip(self.albedo_logits, -LOGIT_CLAMP, LOGIT_CLAMP))

    @property
    def shading(self) -> np.ndarray:
        return self.shading_raw

    def copy(self) -> "IntrinsicEstimate":
        return IntrinsicEstimate(self.albedo_logits.copy(), self.shading_raw.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.albedo_logits.ravel(), self.shading_raw.ravel()])

    def with_flat(self, vec) -> "IntrinsicEstimate":
        n = self.albedo_logits.size
        return IntrinsicEstimate(
            np.asarray(vec[:n], dtype=np.float64).reshape(self.albedo_logits.shape).copy(),
            np.asarray(vec[n:], dtype=np.float64).reshape(self.shading_raw.shape).copy(),
        )


@dataclass
class SolverConfig:
    iterations: int = 2000
    learning_rate: float = 0.05
    moment_decays: tuple = (0.9, 0.999)
    resample_interval: int = 100
    pair_radius: float | None = None
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    edge_cfg: EdgeClassifierConfig = field(default_factory=lambda: EdgeClassifierConfig(**SOLVER_EDGE_DEFAULTS))
    pair_cfg: PairClassifierConfig = field(default_factory=PairClassifierConfig)

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be > 0")
        b1, b2 = self.moment_decays
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise InvalidInputError("moment decays must lie in [0, 1)")
        if self.resample_interval < 1:
            raise InvalidInputError("resample_interval must be >= 1")


@dataclass
class Diagnostics:
    trace: list = field(default_factory=list)
    wall_time: float = 0.0
    edge_counts: dict = field(default_factory=dict)
    pair_counts: dict = field(default_factory=dict)
    initial_recon: float = math.nan
    final: dict = field(default_factory=dict)
    edge_labels: np.ndarray | None = field(default=None, repr=False)


class Adam:
    """Adaptive moment estimation over a flat parameter vector."""

    def __init__(self, lr=0.05, beta1=0.9, beta2=0.999, eps=ADAM_EPS):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Return updated parameters; ``params`` itself is not modified."""
        if not np.all(np.isfinite(grad)):
            raise SolverError("non-finite gradient passed to the optimizer", term="gradient")
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def step(estimate: IntrinsicEstimate, grad_logits, grad_shading, optimizer: Adam) -> IntrinsicEstimate:
    """One optimizer update of both parameter blocks."""
    for name, g in (("albedo_logits", grad_logits), ("shading_raw", grad_shading)):
        if not np.all(np.isfinite(g)):
            raise SolverError(f"non-finite gradient in {name}", term=name)
    grad = np.concatenate([np.ravel(grad_logits), np.ravel(grad_shading)])
    return estimate.with_flat(optimizer.step(estimate.flat(), grad))


def _as_color(visible) -> np.ndarray:
    v = as_image(visible, "visible")
    return v[..., None] if v.ndim == 2 else v


def init_params(visible, seed) -> IntrinsicEstimate:
    """Shading starts at the grey image plus 0.1; albedo explains the rest."""
    vis = _as_color(visible)
    shading = to_grayscale(vis) + 0.1
    ratio = np.clip(vis / shading[..., None], 0.02, 0.98)
    logits = np.log(ratio / (1.0 - ratio))
    logits = logits + make_rng(substream(seed, STREAM_INIT)).normal(0.0, 0.01, size=logits.shape)
    return IntrinsicEstimate(logits, shading)


def objective_and_param_grad(estimate: IntrinsicEstimate, data: ObjectiveData, weights: LossWeights):
    """Total objective plus its gradient w.r.t. the raw parameters."""
    albedo = estimate.albedo
    report = total_objective(albedo, estimate.shading, data, weights)
    inside = np.abs(estimate.albedo_logits) < LOGIT_CLAMP
    grad_logits = report.grad_albedo * albedo * (1.0 - albedo) * inside
    return report, grad_logits, report.grad_shading


def _check_report(report: LossReport):
    for term in ("recon", "edge", "ordinal", "nonneg", "total"):
        if not math.isfinite(getattr(report, term)):
            raise SolverError(f"loss term {term!r} is not finite", term=term)
    for name in ("grad_albedo", "grad_shading"):
        if not np.all(np.isfinite(getattr(report, name))):
            raise SolverError(f"gradient {name!r} is not finite", term=name)


def shading_normalizer(shading) -> float:
    z = float(np.percentile(shading, 99))
    return z if z > 1e-6 else 1.0


def decompose(visible, thermal, config: SolverConfig | None = None, callback=None):
    """Recover ``(albedo, shading, diagnostics)`` from an aligned visible/thermal pair.

    Both inputs are expected in [0, 1].  The thermal image only feeds the
    edge and pair classifiers.
    """
    config = config or SolverConfig()
    vis = _as_color(visible)
    therm = as_image(thermal, "thermal")
    if therm.ndim == 3:
        therm = to_grayscale(therm)
    if vis.shape[:2] != therm.shape:
        raise InvalidInputError(f"visible {vis.shape[:2]} and thermal {therm.shape} differ in size")
    h, w = therm.shape
    vis_gray = to_grayscale(vis)
    t0 = time.perf_counter()

    edge_labels = classify_edges(vis_gray, therm, config.edge_cfg)
    pair_cfg = config.pair_cfg.resolved(vis_gray, therm)
    radius = config.pair_radius or default_pair_radius(h, w)
    weights = config.weights

    estimate = init_params(vis, config.seed)
    data = ObjectiveData(vis, edge_labels, None)
    optimizer = Adam(config.learning_rate, *config.moment_decays)
    diag = Diagnostics()
    diag.edge_labels = edge_labels
    diag.edge_counts = {EdgeLabel(c).name: int(np.sum(edge_labels == c)) for c in EdgeLabel}
    pair_totals: dict = {}

    for it in range(config.iterations):
        if it % config.resample_interval == 0:
            round_ = it // config.resample_interval
            pairs = sample_point_pairs(h, w, radius, substream(config.seed, STREAM_PAIRS, round_))
            data.pairs = classify_pairs(vis_gray, therm, pairs, pair_cfg)
            data.z_shading = shading_normalizer(estimate.shading)
            for key, n in data.pairs.counts().items():
                pair_totals[key] = pair_totals.get(key, 0) + n
        report, g_logits, g_shading = objective_and_param_grad(estimate, data, weights)
        _check_report(report)
        if it == 0:
            diag.initial_recon = report.recon
        diag.trace.append(report.to_dict() | {"iteration": it, "z_shading": data.z_shading})
        if callback is not None:
            callback(it, estimate, report)
        estimate = step(estimate, g_logits, g_shading, optimizer)

    final, _, _ = objective_and_param_grad(estimate, data, weights)
    _check_report(final)
    diag.final = final.to_dict()
    diag.pair_counts = pair_totals
    diag.wall_time = time.perf_counter() - t0
    return estimate.albedo, estimate.shading, diag


# -- gradient verification ----------------------------------------------------


@dataclass
class GradientCheckReport:
    max_rel_error: float
    worst_index: int
    worst_param: str
    analytic: float
    numeric: float
    checked: int
    skipped: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _kink_params(estimate: IntrinsicEstimate, data: ObjectiveData, weights: LossWeights, tol: float,
                 fd_step: float = 0.0) -> set:
    """Flat indices of parameters a finite-difference probe could push across a kink.

    Kinks are the hinge corners, the zero of the shading penalty and the logit
    clamp.  The exclusion band is ``tol`` widened by how far one probe step
    can move the kinked quantity.
    """
    bad = set()
    logits = estimate.albedo_logits
    h, w, k = logits.shape
    n_logits = logits.size
    band = tol + fd_step
    for idx in np.flatnonzero(np.abs(np.abs(logits.ravel()) - LOGIT_CLAMP) < band):
        bad.add(int(idx))
    for idx in np.flatnonzero(np.abs(estimate.shading.ravel()) < band):
        bad.add(n_logits + int(idx))
    if data.pairs is not None and len(data.pairs):
        args, code, _ = hinge_arguments(
            estimate.albedo.mean(axis=2), estimate.shading, data.pairs, weights.margin, data.z_albedo, data.z_shading
        )
        # one step moves a hinge argument by at most step / z (sigmoid slope <= 1/4)
        reach = fd_step / min(data.z_albedo, data.z_shading)
        near = np.abs(args) < tol + reach
        for n in np.flatnonzero(near):
            for (r, c) in (data.pairs.i[n], data.pairs.j[n]):
                if code[n] == 1:
                    bad.add(n_logits + int(r) * w + int(c))
                else:
                    base = (int(r) * w + int(c)) * k
                    bad.update(range(base, base + k))
    return bad


def check_gradients(estimate: IntrinsicEstimate, data: ObjectiveData, weights: LossWeights, trials=200, seed=0,
                    fd_step=1e-6, kink_tol=1e-5, zero_tol=1e-12) -> GradientCheckReport:
    """Compare analytic parameter gradients with central finite differences.

    The two probe objectives are differenced per element and summed with
    ``math.fsum``, so roundoff scales with the touched terms rather than the
    whole objective.  Relative error is ``|a - n| / max(|a|, |n|)``; when both
    are below ``zero_tol`` the error is defined as 0.
    """
    _, g_logits, g_shading = objective_and_param_grad(estimate, data, weights)
    analytic = np.concatenate([g_logits.ravel(), g_shading.ravel()])
    theta = estimate.flat()
    excluded = _kink_params(estimate, data, weights, kink_tol, fd_step)
    candidates = np.array([i for i in range(theta.size) if i not in excluded], dtype=np.int64)
    rng = make_rng(seed)
    picks = rng.choice(candidates, size=min(trials, candidates.size), replace=False) if candidates.size else []

    def terms(vec):
        e = estimate.with_flat(vec)
        return objective_terms(e.albedo, e.shading, data, weights)

    worst = GradientCheckReport(0.0, -1, "", 0.0, 0.0, 0, len(excluded))
    n_logits = estimate.albedo_logits.size
    for idx in picks:
        plus = theta.copy()
        minus = theta.copy()
        plus[idx] += fd_step
        minus[idx] -= fd_step
        numeric = math.fsum(terms(plus) - terms(minus)) / (2 * fd_step)
        a = analytic[idx]
        scale = max(abs(a), abs(numeric))
        err = 0.0 if scale < zero_tol else abs(a - numeric) / scale
        worst.checked += 1
        if err > worst.max_rel_error or worst.worst_index < 0:
            worst.max_rel_error = float(err)
            worst.worst_index = int(idx)
            worst.worst_param = "albedo_logits" if idx < n_logits else "shading_raw"
            worst.analytic = float(a)
            worst.numeric = float(numeric)
    return worst


def random_check_problem(height=16, width=16, channels=3, seed=0, margin=0.01):
    """Random estimate and data with every loss term active, for gradient checks.

    Edge labels and pair labels are drawn at random rather than classified,
    and part of the shading is negative so the penalty is live.
    """
    rng = make_rng(substream(seed, STREAM_CHECK))
    logits = rng.normal(0.0, 1.5, size=(height, width, channels))
    shading = rng.uniform(-0.2, 1.0, size=(height, width))
    visible = rng.uniform(0.05, 0.9, size=(height, width, channels))
    edges = rng.integers(0, 3, size=(height, width)).astype(np.int8)
    radius = max(2.0, min(height, width) / 8)
    pairs = sample_point_pairs(height, width, radius, substream(seed, STREAM_CHECK, 1))
    choices = np.array([PairLabel.NONE, PairLabel.SPLUS, PairLabel.SMINUS, PairLabel.APLUS, PairLabel.AMINUS])
    labels = rng.choice(choices, size=len(pairs)).astype(np.int8)
    pairs = PointPairSet(pairs.i, pairs.j, labels, np.zeros(len(pairs)), np.zeros(len(pairs)))
    data = ObjectiveData(visible, edges, pairs, z_shading=float(rng.uniform(0.5, 1.5)), z_albedo=1.0)
    weights = LossWeights(margin=margin)
    return IntrinsicEstimate(logits, shading), data, weights
