"""Manifold models, radial functions and radial L^p norms."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InputError, ModelError, UnsupportedModelError
from .quadrature import RadialGrid

HYPERBOLIC = "hyperbolic"
CUSTOM = "custom_density"

DEFAULT_R_MAX = 20.0
DEFAULT_GRID_SIZE = 4096
DEFAULT_LAMBDA_MAX = 50.0
DEFAULT_SPECTRAL_NODES = 2048


def sphere_area(k: int) -> float:
    """Area of the unit k-sphere in R^{k+1} (``omega_k``)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform nodes on ``[0, lambda_max]`` used for inversion."""

    lambda_max: float = DEFAULT_LAMBDA_MAX
    count: int = DEFAULT_SPECTRAL_NODES

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.lambda_max, self.count)


@dataclass(eq=False)
class ManifoldModel:
    """A rank-one radial model: sphere-volume density ``A`` and ``rho``.

    ``kappa`` holds the inversion calibration constant once
    :func:`radialchaos.eigen.calibrate_inversion` has run. ``_cache`` holds
    eigenfunction tables and is private to the computational modules.
    """

    dimension: int
    rho: float
    model_kind: str
    r_max: float
    grid: RadialGrid
    density_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    log_density_derivative: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    small_r_curvature: float = field(default=0.0, repr=False)
    spectral: SpectralGrid = field(default_factory=SpectralGrid)
    kappa: Optional[float] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def is_hyperbolic(self) -> bool:
        return self.model_kind == HYPERBOLIC

    @property
    def calibrated(self) -> bool:
        return self.kappa is not None

    def density(self, r):
        """Sphere-volume density ``A(r)``."""
        return self.density_fn(np.asarray(r, dtype=float))

    @property
    def volume_weights(self) -> np.ndarray:
        """Quadrature weights ``w_i A(r_i)`` for integrals against dvol."""
        key = "volume_weights"
        if key not in self._cache:
            self._cache[key] = self.grid.weights * self.density(self.grid.nodes)
        return self._cache[key]

    def describe(self) -> dict:
        return {
            "kind": self.model_kind,
            "n": self.dimension,
            "rho": self.rho,
            "r_max": self.r_max,
            "grid_size": len(self.grid),
            "lambda_max": self.spectral.lambda_max,
            "spectral_nodes": self.spectral.count,
        }


def _hyperbolic_density(n: int):
    omega = sphere_area(n - 1)

    def density(r):
        return omega * np.sinh(r) ** (n - 1)

    def dlog(r):
        return (n - 1) / np.tanh(r)

    return density, dlog


def _custom_from_callable(n: int, density, dlog):
    if dlog is None:
        def dlog(r):
            r = np.asarray(r, dtype=float)
            h = 1e-5 * np.maximum(r, 1e-2)
            return (np.log(density(r + h)) - np.log(density(r - h))) / (2 * h)
    return density, dlog


def density_from_csv(path, n: int):
    """Load ``r,A`` samples and spline ``log(A/r^{n-1})``."""
    path = Path(path)
    if not path.exists():
        raise ModelError(f"density file not found: {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    r, a = data[:, 0], data[:, 1]
    keep = r > 0
    r, a = r[keep], a[keep]
    if np.any(a <= 0):
        raise ModelError("custom density must be positive for r > 0")
    spline = CubicSpline(r, np.log(a) - (n - 1) * np.log(r))
    dspline = spline.derivative()

    def density(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.exp(spline(x)) * x ** (n - 1)
        return out

    def dlog(x):
        x = np.asarray(x, dtype=float)
        return (n - 1) / x + dspline(x)

    return density, dlog, float(r.max())


def build_model(
    kind: str = HYPERBOLIC,
    n: int = 3,
    r_max: float = DEFAULT_R_MAX,
    grid_size: int = DEFAULT_GRID_SIZE,
    *,
    rho: Optional[float] = None,
    density: Optional[Callable] = None,
    log_density_derivative: Optional[Callable] = None,
    density_csv: Optional[str] = None,
    lambda_max: float = DEFAULT_LAMBDA_MAX,
    spectral_nodes: int = DEFAULT_SPECTRAL_NODES,
) -> ManifoldModel:
    """Build a model with its radial quadrature grid.

    ``kind="hyperbolic"`` gives real hyperbolic space H^n with
    ``A(r) = omega_{n-1} sinh^{n-1} r`` and ``rho = (n-1)/2``. For
    ``kind="custom_density"`` supply ``rho`` and either a density callable or
    a ``density_csv`` file with header ``r,A``; curvature hypotheses are taken
    on trust.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InputError(f"dimension must be an integer >= 2, got {n!r}")
    if not r_max > 0:
        raise InputError(f"r_max must be positive, got {r_max!r}")
    if not isinstance(grid_size, (int, np.integer)) or grid_size < 16 or grid_size > 2**20:
        raise InputError(f"grid_size must be an integer in [16, 2^20], got {grid_size!r}")
    if spectral_nodes < 16 or not lambda_max > 0:
        raise InputError("spectral grid needs lambda_max > 0 and at least 16 nodes")
    n = int(n)
    grid = RadialGrid.with_size(r_max, int(grid_size))

    if kind == HYPERBOLIC:
        dens, dlog = _hyperbolic_density(n)
        rho_val = (n - 1) / 2.0
        curv = (n - 1) / 6.0
    elif kind == CUSTOM:
        if rho is None or not rho > 0:
            raise ModelError("custom density models need a positive rho")
        if density_csv is not None:
            dens, dlog, r_top = density_from_csv(density_csv, n)
            if r_top < r_max:
                raise ModelError(f"density samples stop at r={r_top}, below r_max={r_max}")
        elif density is not None:
            dens, dlog = _custom_from_callable(n, density, log_density_derivative)
        else:
            raise ModelError("custom density models need a density callable or CSV")
        rho_val = float(rho)
        probe = np.linspace(0.0, r_max, 2001)[1:]
        with np.errstate(all="ignore"):
            vals = np.asarray(dens(probe), dtype=float)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ModelError("custom density must be finite and positive on (0, r_max]")
        # A'/A = (n-1)/r + 2*alpha*r + O(r^3); alpha feeds the r^4 startup term
        r_s = 1e-2
        curv = float((dlog(np.array([r_s]))[0] - (n - 1) / r_s) / (2 * r_s))
    else:
        raise InputError(f"unknown model kind {kind!r}")

    return ManifoldModel(
        dimension=n,
        rho=rho_val,
        model_kind=kind,
        r_max=float(r_max),
        grid=grid,
        density_fn=dens,
        log_density_derivative=dlog,
        small_r_curvature=curv,
        spectral=SpectralGrid(float(lambda_max), int(spectral_nodes)),
    )


def model_from_config(cfg: dict) -> ManifoldModel:
    """Build a model from the ``model``/``spectral`` blocks of a run config."""
    m = dict(cfg.get("model", {}))
    spec = cfg.get("spectral", {})
    kind = m.pop("kind", HYPERBOLIC)
    kwargs = dict(
        n=m.pop("n", 3),
        r_max=m.pop("r_max", DEFAULT_R_MAX),
        grid_size=m.pop("grid_size", DEFAULT_GRID_SIZE),
        lambda_max=spec.get("lambda_max", DEFAULT_LAMBDA_MAX),
        spectral_nodes=spec.get("nodes", DEFAULT_SPECTRAL_NODES),
    )
    if kind == CUSTOM:
        kwargs["rho"] = m.pop("rho", None)
        kwargs["density_csv"] = m.pop("density_csv", None)
        if kwargs["density_csv"] is None:
            raise ModelError("custom_density config needs density_csv")
    return build_model(kind, **kwargs)


def strip_halfwidth(model: ManifoldModel, p: float) -> float:
    """Half-width ``(1 - 2/p) rho`` of the strip S_p; ``p=inf`` gives ``rho``."""
    if not p > 2:
        raise InputError(f"strip S_p is only used for p > 2, got p={p!r}")
    if math.isinf(p):
        return model.rho
    return (1.0 - 2.0 / p) * model.rho


def conjugate_exponent(p: float) -> float:
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass
class RadialFunction:
    """Samples ``u(r_i)`` of a radial profile on a model grid."""

    profile: np.ndarray
    grid: RadialGrid
    label: str = ""
    nonnegative: bool = False

    def __post_init__(self):
        self.profile = np.asarray(self.profile)
        if self.profile.shape != (len(self.grid),):
            raise InputError(
                f"profile has shape {self.profile.shape}, grid has {len(self.grid)} nodes"
            )
        if self.nonnegative and np.iscomplexobj(self.profile):
            if np.any(np.abs(self.profile.imag) > 0):
                raise InputError("nonnegative radial function has complex values")
        if self.nonnegative and np.any(np.real(self.profile) < 0):
            raise InputError("radial function tagged nonnegative has negative values")

    @classmethod
    def from_callable(cls, model: ManifoldModel, fn, label: str = "", nonnegative=False):
        return cls(np.asarray(fn(model.grid.nodes)), model.grid, label, nonnegative)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def __call__(self, r):
        """Evaluate by panel interpolation; zero beyond ``r_max``."""
        return self.grid.interpolate(self.profile, r)

    def _like(self, values, label):
        return RadialFunction(values, self.grid, label)

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        _check_same_grid(self.grid, other.grid)
        return self._like(self.profile + other.profile, f"({self.label}+{other.label})")

    def __sub__(self, other: "RadialFunction") -> "RadialFunction":
        _check_same_grid(self.grid, other.grid)
        return self._like(self.profile - other.profile, f"({self.label}-{other.label})")

    def __mul__(self, scalar) -> "RadialFunction":
        return self._like(self.profile * scalar, self.label)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        write_radial_csv(path, self.nodes, self.profile)


def _check_same_grid(a: RadialGrid, b: RadialGrid) -> None:
    if a != b:
        raise InputError("radial functions live on different grids")


def check_on_model(model: ManifoldModel, f: RadialFunction) -> None:
    if f.grid != model.grid:
        raise InputError("radial function is not sampled on the model grid")


def fmt(x) -> str:
    """Float to text with 17 significant digits (round-trips doubles)."""
    return format(float(x), ".17g")


def write_radial_csv(path, r, values) -> None:
    values = np.asarray(values, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "re", "im"])
        for ri, v in zip(r, values):
            w.writerow([fmt(ri), fmt(v.real), fmt(v.imag)])


def read_radial_csv(path, model: ManifoldModel, label: Optional[str] = None) -> RadialFunction:
    """Read ``r,re,im`` rows onto the model grid.

    Rows that coincide with the grid nodes are used directly; otherwise the
    samples are cubic-spline interpolated and set to zero outside their span.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["r", "re", "im"]:
            raise InputError(f"{path}: expected header r,re,im")
        try:
            rows = np.array([[float(x) for x in row[:3]] for row in reader if row])
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
    if rows.size == 0:
        raise InputError(f"{path}: no data rows")
    r, vals = rows[:, 0], rows[:, 1] + 1j * rows[:, 2]
    if not np.all(vals.imag == 0):
        out_dtype = complex
    else:
        vals = vals.real
        out_dtype = float
    nodes = model.grid.nodes
    if r.shape == nodes.shape and np.allclose(r, nodes, rtol=1e-12, atol=1e-14):
        prof = vals
    else:
        order = np.argsort(r)
        r, vals = r[order], vals[order]
        spline = CubicSpline(r, vals)
        prof = np.where((nodes >= r[0]) & (nodes <= r[-1]), spline(nodes), 0.0).astype(out_dtype)
    return RadialFunction(prof, model.grid, label or path.stem)


def lp_norm_radial(model: ManifoldModel, f: RadialFunction, p: float) -> float:
    """``(int |u|^p A dr)^{1/p}``; ``p=inf`` gives the max norm on the grid."""
    check_on_model(model, f)
    if math.isinf(p):
        return float(np.max(np.abs(f.profile)))
    if p < 1:
        raise InputError(f"L^p norm needs p >= 1, got {p!r}")
    return float(np.sum(model.volume_weights * np.abs(f.profile) ** p) ** (1.0 / p))


def two_center_distance(model: ManifoldModel, r, R, theta):
    """Distance from a point at ``(r, theta)`` around o to the point at distance R on the axis.

    Uses the hyperbolic law of cosines in the cancellation-free form
    ``sinh^2(d/2) = sinh^2((r-R)/2) + sinh r sinh R sin^2(theta/2)``.
    """
    if not model.is_hyperbolic:
        raise UnsupportedModelError("two-center geometry is only available on hyperbolic models")
    return hyperbolic_distance(r, R, theta)


def hyperbolic_distance(r, R, theta):
    r = np.asarray(r, dtype=float)
    R = np.asarray(R, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = np.sinh(0.5 * (r - R)) ** 2 + np.sinh(r) * np.sinh(R) * np.sin(0.5 * theta) ** 2
    return 2.0 * np.arcsinh(np.sqrt(s))
