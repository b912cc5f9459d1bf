"""Forward light/heat models and synthetic ground-truth scenes.

The visible image of a Lambertian scene is ``g * albedo * shading``; the light
that is not reflected, ``(1 - albedo) * shading``, heats the surface.  At
thermal equilibrium the surface temperature solves a linear screened-Poisson
equation, and a linearized thermal camera maps temperature to intensity.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, SolverError
from .fileio import ensure_dir, read_pfm, write_pfm
from .imagecore import as_image, gaussian_blur, laplacian, to_grayscale

STEFAN_BOLTZMANN = 5.670374419e-8

SCENE_KINDS = ("mondrian", "checker_shadow", "color_chart", "voronoi_smooth")

ALBEDO_RANGE = (0.05, 0.95)
SHADING_RANGE = (0.05, 1.0)

BUNDLE_FILES = ("truth_albedo.pfm", "truth_shading.pfm", "visible.pfm", "absorbed.pfm", "thermal.pfm")


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; every random stream in the package goes through here."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class SceneTruth:
    albedo: np.ndarray
    shading: np.ndarray
    gain: float = 1.0

    def __post_init__(self):
        self.albedo = as_image(self.albedo, "albedo")
        if self.albedo.ndim == 2:
            self.albedo = self.albedo[..., None]
        self.shading = as_image(self.shading, "shading")
        if self.shading.ndim == 3:
            if self.shading.shape[2] != 1:
                raise InvalidInputError("shading must be single-channel")
            self.shading = self.shading[..., 0]
        if self.albedo.shape[:2] != self.shading.shape:
            raise InvalidInputError(f"albedo {self.albedo.shape[:2]} and shading {self.shading.shape} differ in size")
        if not (np.all(self.albedo > 0) and np.all(self.albedo < 1)):
            raise InvalidInputError("albedo must lie strictly inside (0, 1)")
        if not np.all(self.shading > 0):
            raise InvalidInputError("shading must be strictly positive")
        if not self.gain > 0:
            raise InvalidInputError(f"gain must be positive, got {self.gain}")

    @property
    def shape(self):
        return self.shading.shape

    @property
    def mean_albedo(self) -> np.ndarray:
        return to_grayscale(self.albedo)


@dataclass
class SpectralConfig:
    """Infrared share of the illuminant: ``beta = 1 + (1 - albedo_infrared) * intensity_ratio``."""

    albedo_infrared: float = 1.0
    intensity_ratio: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.albedo_infrared <= 1.0:
            raise InvalidInputError(f"albedo_infrared must be in [0, 1], got {self.albedo_infrared}")
        if self.intensity_ratio < 0:
            raise InvalidInputError(f"intensity_ratio must be >= 0, got {self.intensity_ratio}")

    @property
    def beta(self) -> float:
        return 1.0 + (1.0 - self.albedo_infrared) * self.intensity_ratio


@dataclass
class ThermalSceneParams:
    convection_coeff: float = 10.0  # W m^-2 K^-1
    air_temp: float = 300.0  # K
    surround_temp: float = 300.0  # K
    emissivity: float = 0.95
    conductivity: float = 0.0  # W K^-1 per lattice unit
    stefan_boltzmann: float = STEFAN_BOLTZMANN
    heat_capacity: float = 1.0e4  # unused at steady state
    response_gain: float = 1.0
    response_offset: float = 0.0

    def __post_init__(self):
        if not 0 < self.emissivity <= 1:
            raise InvalidInputError(f"emissivity must be in (0, 1], got {self.emissivity}")
        if self.conductivity < 0:
            raise InvalidInputError(f"conductivity must be >= 0, got {self.conductivity}")
        if self.response_gain <= 0:
            raise InvalidInputError(f"response_gain must be > 0, got {self.response_gain}")
        if self.convection_coeff < 0 or self.surround_temp <= 0 or self.air_temp <= 0:
            raise InvalidInputError("convection coefficient and temperatures must be physical")
        if not self.c1 > 0:
            raise InvalidInputError("thermal parameters give a non-positive intensity slope")

    @property
    def linear_loss(self) -> float:
        """Combined convective + linearized radiative loss per kelvin."""
        return self.convection_coeff + 4 * self.emissivity * self.stefan_boltzmann * self.surround_temp**3

    @property
    def ambient_gain(self) -> float:
        return (
            self.convection_coeff * self.air_temp
            + 4 * self.emissivity * self.stefan_boltzmann * self.surround_temp**4
        )

    @property
    def c1(self) -> float:
        return self.linear_loss / (self.emissivity * self.response_gain)

    @property
    def c2(self) -> float:
        return self.conductivity / (self.emissivity * self.response_gain)

    @property
    def c3(self) -> float:
        eps, p1, p2, ts = self.emissivity, self.response_gain, self.response_offset, self.surround_temp
        return self.linear_loss * (p2 + p1 * ts * (1 - eps)) / (eps * p1) + self.ambient_gain


def render_visible(scene: SceneTruth) -> np.ndarray:
    """k-channel visible image; shading is shared by all channels."""
    return scene.gain * scene.albedo * scene.shading[..., None]


def render_absorbed(scene: SceneTruth) -> np.ndarray:
    return (1.0 - scene.mean_albedo) * scene.shading


def render_absorbed_broadband(scene: SceneTruth, spectral: SpectralConfig) -> np.ndarray:
    beta = spectral.beta
    if beta < 1:
        raise InvalidInputError(f"beta must be >= 1, got {beta}")
    return (beta - scene.mean_albedo) * scene.shading


def steady_state_temperature(source, params: ThermalSceneParams, tol=1e-9, max_iter=200_000) -> np.ndarray:
    """Surface temperature (K) at thermal equilibrium for absorbed power ``source`` (W m^-2).

    Solves ``a*T - kappa*lap(T) = S + b`` where ``a`` is the linear loss and
    ``b`` the ambient gain.  Without conduction the answer is pointwise;
    otherwise Jacobi sweeps start from that pointwise answer.
    """
    S = as_image(source, "source")
    if S.ndim == 3:
        S = to_grayscale(S)
    if np.any(S < 0):
        raise InvalidInputError("absorbed power must be non-negative")
    a = params.linear_loss
    rhs = S + params.ambient_gain
    T = rhs / a
    kappa = params.conductivity
    if kappa == 0:
        return T
    if S.shape[0] < 3 or S.shape[1] < 3:
        raise InvalidInputError("conduction needs at least 3x3 pixels")

    scale = float(np.linalg.norm(rhs))
    denom = a + 4 * kappa
    residual = np.inf
    for _ in range(max_iter):
        residual = float(np.linalg.norm(a * T - kappa * laplacian(T) - rhs)) / scale
        if residual < tol:
            return T
        # laplacian(T) + 4T is the neighbour sum under reflected borders
        T = (rhs + kappa * (laplacian(T) + 4 * T)) / denom
    raise SolverError(
        f"Jacobi solver did not converge in {max_iter} sweeps (relative residual {residual:.3e})",
        term="steady_state_temperature",
        residual=residual,
    )


def thermal_camera(temperature, params: ThermalSceneParams) -> np.ndarray:
    """Linear-response thermal camera: ``p1*(eps*T + (1-eps)*Ts) + p2``."""
    T = as_image(temperature, "temperature")
    if np.any(T <= 0):
        raise InvalidInputError("temperature must be positive (kelvin)")
    eps = params.emissivity
    return params.response_gain * (eps * T + (1 - eps) * params.surround_temp) + params.response_offset


def add_noise(image, stddev: float, seed: int) -> np.ndarray:
    """Add i.i.d. Gaussian noise from a seeded Philox stream."""
    arr = as_image(image)
    if stddev < 0:
        raise InvalidInputError(f"stddev must be >= 0, got {stddev}")
    if stddev == 0:
        return arr.copy()
    return arr + make_rng(seed).normal(0.0, stddev, size=arr.shape)


# -- synthetic scenes ---------------------------------------------------------


def _random_colors(rng, n, channels, lo=0.1, hi=0.9):
    return rng.uniform(lo, hi, size=(n, channels))


def _mondrian(rng, h, w, k):
    albedo = np.empty((h, w, k))
    albedo[:] = _random_colors(rng, 1, k)[0]
    m = min(h, w)
    for _ in range(int(rng.integers(8, 16))):
        rh = int(rng.integers(max(4, m // 8), max(5, m // 2)))
        rw = int(rng.integers(max(4, m // 8), max(5, m // 2)))
        r0 = int(rng.integers(0, h - rh + 1))
        c0 = int(rng.integers(0, w - rw + 1))
        albedo[r0:r0 + rh, c0:c0 + rw] = _random_colors(rng, 1, k)[0]
    shading = np.full((h, w), 0.8)
    return albedo, shading


def _checker_shadow(rng, h, w, k):
    cell = max(4, min(h, w) // 8)
    yy, xx = np.mgrid[0:h, 0:w]
    phase = int(rng.integers(0, 2))
    parity = ((yy // cell + xx // cell + phase) % 2).astype(bool)
    light = 0.75 + rng.uniform(-0.05, 0.05, size=k)
    dark = 0.3 + rng.uniform(-0.05, 0.05, size=k)
    albedo = np.where(parity[..., None], light, dark)

    m = min(h, w)
    cy = rng.uniform(0.3, 0.7) * h
    cx = rng.uniform(0.3, 0.7) * w
    radius = rng.uniform(0.18, 0.3) * m
    disk = ((yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2).astype(np.float64)
    shadow = gaussian_blur(disk, max(1.0, m / 64))
    theta = rng.uniform(0, 2 * np.pi)
    ramp = (np.cos(theta) * xx / w + np.sin(theta) * yy / h)
    ramp = (ramp - ramp.min()) / (ramp.max() - ramp.min())
    shading = (0.8 + 0.2 * ramp) * (1.0 - 0.6 * shadow)
    return albedo, shading


def _color_chart(rng, h, w, k):
    rows, cols = 4, 6
    colors = _random_colors(rng, rows * cols, k, 0.08, 0.92)
    yy, xx = np.mgrid[0:h, 0:w]
    ri = np.minimum(yy * rows // h, rows - 1)
    ci = np.minimum(xx * cols // w, cols - 1)
    albedo = colors[ri * cols + ci]
    theta = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(theta) * xx / w + np.sin(theta) * yy / h
    ramp = (ramp - ramp.min()) / (ramp.max() - ramp.min())
    shading = 0.35 + 0.6 * ramp
    return albedo, shading


def _voronoi_smooth(rng, h, w, k):
    n = int(rng.integers(10, 17))
    sites = rng.uniform(0, 1, size=(n, 2)) * (h, w)
    colors = _random_colors(rng, n, k)
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (yy[..., None] - sites[:, 0]) ** 2 + (xx[..., None] - sites[:, 1]) ** 2
    albedo = colors[np.argmin(d2, axis=-1)]

    m = min(h, w)
    field_ = np.zeros((h, w))
    for _ in range(int(rng.integers(3, 6))):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        s = rng.uniform(0.25, 0.5) * m
        field_ += rng.uniform(0.5, 1.0) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))
    field_ = (field_ - field_.min()) / max(field_.max() - field_.min(), 1e-12)
    shading = 0.25 + 0.75 * field_
    return albedo, shading


_GENERATORS = {
    "mondrian": _mondrian,
    "checker_shadow": _checker_shadow,
    "color_chart": _color_chart,
    "voronoi_smooth": _voronoi_smooth,
}


def make_scene(kind: str, height: int, width: int, seed: int, channels: int = 3, gain: float = 1.0) -> SceneTruth:
    """Build one of the synthetic ground-truth scenes in :data:`SCENE_KINDS`."""
    if kind not in _GENERATORS:
        raise InvalidInputError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")
    if height < 16 or width < 16:
        raise InvalidInputError(f"scenes need at least 16x16 pixels, got {height}x{width}")
    if channels < 1:
        raise InvalidInputError("channels must be >= 1")
    albedo, shading = _GENERATORS[kind](make_rng(seed), height, width, channels)
    albedo = np.clip(albedo, *ALBEDO_RANGE)
    shading = np.clip(shading, *SHADING_RANGE)
    return SceneTruth(albedo=albedo, shading=shading, gain=gain)


# -- scene bundles ------------------------------------------------------------


@dataclass
class SimulatedImages:
    truth: SceneTruth
    visible: np.ndarray
    absorbed: np.ndarray
    temperature: np.ndarray
    thermal: np.ndarray
    meta: dict = field(default_factory=dict)


def simulate_scene(
    scene: SceneTruth,
    params: ThermalSceneParams | None = None,
    spectral: SpectralConfig | None = None,
    irradiance_scale: float = 100.0,
    noise_stddev: float = 0.0,
    noise_seed: int = 0,
) -> SimulatedImages:
    """Render visible, absorbed-light and thermal-camera images for a scene.

    ``irradiance_scale`` converts unit shading to W m^-2 before the heat
    balance; the absorbed image itself stays in shading units.  Noise, if any,
    is added to the thermal-camera image only.
    """
    params = params or ThermalSceneParams()
    visible = render_visible(scene)
    if spectral is None:
        absorbed = render_absorbed(scene)
    else:
        absorbed = render_absorbed_broadband(scene, spectral)
    temperature = steady_state_temperature(absorbed * irradiance_scale, params)
    thermal = add_noise(thermal_camera(temperature, params), noise_stddev, noise_seed)
    meta = {
        "thermal_params": asdict(params),
        "spectral": asdict(spectral) if spectral is not None else None,
        "beta": spectral.beta if spectral is not None else 1.0,
        "irradiance_scale": irradiance_scale,
        "noise_stddev": noise_stddev,
        "noise_seed": noise_seed,
        "gain": scene.gain,
        "shape": list(scene.albedo.shape),
    }
    return SimulatedImages(scene, visible, absorbed, temperature, thermal, meta)


def write_bundle(directory, sim: SimulatedImages, extra_meta: dict | None = None) -> Path:
    out = ensure_dir(directory)
    write_pfm(out / "truth_albedo.pfm", sim.truth.albedo)
    write_pfm(out / "truth_shading.pfm", sim.truth.shading)
    write_pfm(out / "visible.pfm", sim.visible)
    write_pfm(out / "absorbed.pfm", sim.absorbed)
    write_pfm(out / "thermal.pfm", sim.thermal)
    meta = dict(sim.meta)
    if extra_meta:
        meta.update(extra_meta)
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def read_truth(directory) -> SceneTruth:
    d = Path(directory)
    albedo = read_pfm(d / "truth_albedo.pfm")
    shading = read_pfm(d / "truth_shading.pfm")
    gain = 1.0
    meta_path = d / "meta.json"
    if meta_path.exists():
        gain = float(json.loads(meta_path.read_text()).get("gain", 1.0))
    return SceneTruth(albedo=albedo, shading=shading, gain=gain)
