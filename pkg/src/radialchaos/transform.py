"""Spherical Fourier transform, its inversion, and translates on hyperbolic models."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .eigen import (
    eigenfunction_profile,
    require_calibration,
    solve_radial_ode,
    spectral_table,
)
from .errors import InputError, TruncationError, UnsupportedModelError
from .model import (
    ManifoldModel,
    RadialFunction,
    check_on_model,
    fmt,
    hyperbolic_distance,
    strip_halfwidth,
)
from .quadrature import gauss_legendre

TAIL_WARN = 1e-9
TAIL_FAIL = 1e-6
N_THETA = 128


@dataclass
class SpectralFunction:
    """Samples of a spherical transform at (possibly complex) lambdas."""

    lambda_nodes: np.ndarray
    values: np.ndarray
    strip_halfwidth: float
    source_label: str = ""

    def __mul__(self, other):
        if isinstance(other, SpectralFunction):
            if other.lambda_nodes.shape != self.lambda_nodes.shape or not np.array_equal(
                other.lambda_nodes, self.lambda_nodes
            ):
                raise InputError("spectral functions sampled at different nodes")
            return SpectralFunction(
                self.lambda_nodes,
                self.values * other.values,
                min(self.strip_halfwidth, other.strip_halfwidth),
                f"{self.source_label}*{other.source_label}",
            )
        return SpectralFunction(self.lambda_nodes, self.values * other, self.strip_halfwidth, self.source_label)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        lam = np.asarray(self.lambda_nodes, dtype=complex)
        val = np.asarray(self.values, dtype=complex)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda_re", "lambda_im", "re", "im"])
            for a, b in zip(lam, val):
                w.writerow([fmt(a.real), fmt(a.imag), fmt(b.real), fmt(b.imag)])


def decay_rate(model: ManifoldModel, f: RadialFunction) -> float:
    """Exponential decay rate of the profile tail (``inf`` if it vanishes)."""
    r = model.grid.nodes
    sel = (r >= 0.5 * model.r_max) & (r <= 0.9 * model.r_max)
    mag = np.abs(f.profile[sel])
    if mag.size < 2 or np.any(mag < 1e-280):
        return math.inf
    slope = np.polyfit(r[sel], np.log(mag), 1)[0]
    return float(-slope)


def holomorphy_halfwidth(model: ManifoldModel, f: RadialFunction) -> float:
    """Largest ``h <= rho`` such that ``u phi_lambda A`` decays for ``|Im lambda| < h``."""
    a = decay_rate(model, f)
    return float(min(model.rho, max(a - model.rho, 0.0)))


def _tail_ratio(model: ManifoldModel, integrand: np.ndarray) -> np.ndarray:
    r = model.grid.nodes
    tail = r >= 0.95 * model.r_max
    mag = np.abs(integrand)
    top = mag.max(axis=-1)
    top = np.where(top > 0, top, 1.0)
    return mag[..., tail].max(axis=-1) / top


def _check_tail(ratio: np.ndarray, what: str) -> None:
    worst = float(np.max(ratio)) if np.size(ratio) else 0.0
    if worst > TAIL_FAIL:
        raise TruncationError(f"{what}: truncated tail is {worst:.3e} of the integrand peak")
    if worst > TAIL_WARN:
        warnings.warn(f"{what}: truncated tail is {worst:.3e} of the integrand peak", stacklevel=3)


def _phi_on_grid(model: ManifoldModel, lambdas: np.ndarray) -> np.ndarray:
    table_nodes = model.spectral.nodes
    if lambdas.shape == table_nodes.shape and not np.iscomplexobj(lambdas) and np.array_equal(lambdas, table_nodes):
        return spectral_table(model).phi
    lam = lambdas
    if np.iscomplexobj(lam) and np.all(lam.imag == 0):
        lam = lam.real
    # phi depends on lambda^2 only; solve once per distinct value
    uniq, inv = np.unique(lam, return_inverse=True)
    u, _ = solve_radial_ode(model, uniq, model.grid.nodes)
    return u[inv]


def spherical_transform(model: ManifoldModel, f: RadialFunction, lambdas=None) -> SpectralFunction:
    """``f^(lambda) = int u(r) phi_lambda(r) A(r) dr`` at each lambda.

    ``lambdas=None`` samples the model's spectral grid (cached eigenfunctions).
    """
    check_on_model(model, f)
    lam = model.spectral.nodes if lambdas is None else np.atleast_1d(np.asarray(lambdas))
    if np.any(np.abs(np.imag(lam)) >= model.rho):
        raise InputError(f"spherical transform needs |Im lambda| < rho = {model.rho}")
    phi = _phi_on_grid(model, lam)
    weighted = model.volume_weights * f.profile
    _check_tail(_tail_ratio(model, phi * weighted), "spherical transform")
    values = phi @ weighted
    return SpectralFunction(lam, values, holomorphy_halfwidth(model, f), f.label)


def inverse_transform(model: ManifoldModel, spec: SpectralFunction, label: str = "") -> RadialFunction:
    """Invert ``f(r) = int_0^inf f^(lambda) phi_lambda(r) kappa |c(lambda)|^{-2} dlambda``.

    ``spec`` must be sampled on a uniform real grid starting at 0; the
    trapezoid rule is used in lambda.
    """
    kappa = require_calibration(model)
    lam = np.asarray(spec.lambda_nodes)
    if np.iscomplexobj(lam):
        if np.any(lam.imag != 0):
            raise InputError("inverse transform needs real spectral nodes")
        lam = lam.real
    table = spectral_table(model, lam)
    integrand = table.quad * table.raw_weight * spec.values
    mag = np.abs(integrand)
    top = mag.max()
    if top > 0:
        tail = mag[-max(2, lam.size // 100):].max() / top
        if tail > TAIL_FAIL:
            raise TruncationError(
                f"spectral tail at lambda_max={lam[-1]:g} is {tail:.3e} of the peak; "
                "enlarge the spectral window"
            )
    values = kappa * (table.phi.T @ integrand)
    return RadialFunction(values, model.grid, label or f"inv({spec.source_label})")


def roundtrip_defect(model: ManifoldModel, f: RadialFunction) -> float:
    """Relative L^2 defect of ``inverse_transform(spherical_transform(f))``."""
    g = inverse_transform(model, spherical_transform(model, f))
    vw = model.volume_weights
    return float(np.sqrt(np.sum(vw * np.abs(g.profile - f.profile) ** 2) / np.sum(vw * np.abs(f.profile) ** 2)))


def holomorphy_check(
    model: ManifoldModel,
    f: RadialFunction,
    p: float,
    centers=None,
    radius=None,
    points: int = 32,
) -> float:
    """Largest Cauchy-integral defect of ``f^`` around test points in S_p.

    For each centre the mean of ``f^`` over a circle (the trapezoid form of
    the Cauchy integral) is compared with ``f^`` at the centre.
    """
    hw = strip_halfwidth(model, p)
    if centers is None:
        centers = [0.6j * hw, 1.0 + 0.3j * hw, 2.5 - 0.3j * hw]
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    defects = []
    for c in centers:
        room = hw - abs(c.imag)
        rad = 0.5 * room if radius is None else float(radius)
        if not rad > 0 or abs(c.imag) + rad >= hw:
            raise InputError(f"circle of radius {rad} around {c} leaves the strip |Im| < {hw}")
        ring = c + rad * np.exp(2j * np.pi * np.arange(points) / points)
        spec = spherical_transform(model, f, np.concatenate([[c], ring]))
        defects.append(abs(spec.values[0] - spec.values[1:].mean()))
    return float(max(defects))


# --- translates ----------------------------------------------------------


@lru_cache(maxsize=None)
def axial_quadrature(n: int, n_theta: int = N_THETA):
    """Polar-angle nodes and normalised sphere weights for dimension ``n``.

    The weights integrate functions of the angle to the axis against the
    normalised measure on the unit (n-1)-sphere.
    """
    theta, w = gauss_legendre(0.0, math.pi, n_theta)
    norm = math.sqrt(math.pi) * math.gamma((n - 1) / 2.0) / math.gamma(n / 2.0)
    sw = w * np.sin(theta) ** (n - 2) / norm
    theta.setflags(write=False)
    sw.setflags(write=False)
    return theta, sw


def _require_hyperbolic(model: ManifoldModel) -> None:
    if not model.is_hyperbolic:
        raise UnsupportedModelError("translates need the two-center geometry of a hyperbolic model")


@dataclass
class AxialField:
    """Function on the model ball that is symmetric about a fixed geodesic through o.

    ``values[i, k]`` is the value at distance ``r_i`` from o and angle
    ``theta_k`` to the axis. ``center_distance`` records the translate centre
    for fields built by :func:`translate_radial`.
    """

    center_distance: float
    values: np.ndarray
    r_nodes: np.ndarray
    theta: np.ndarray
    sphere_weights: np.ndarray
    label: str = ""

    def integrate(self, model: ManifoldModel, integrand=None) -> complex:
        vals = self.values if integrand is None else integrand
        return np.einsum("i,ik,k->", model.volume_weights, vals, self.sphere_weights)

    def lp_norm(self, model: ManifoldModel, p: float) -> float:
        if math.isinf(p):
            return float(np.max(np.abs(self.values)))
        return float(self.integrate(model, np.abs(self.values) ** p).real ** (1.0 / p))

    def theta_variation(self) -> float:
        return float(np.max(np.ptp(self.values, axis=1)))

    def __mul__(self, scalar) -> "AxialField":
        return AxialField(self.center_distance, self.values * scalar, self.r_nodes,
                          self.theta, self.sphere_weights, self.label)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        vals = np.asarray(self.values, dtype=complex)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "theta", "re", "im"])
            for i, r in enumerate(self.r_nodes):
                for k, t in enumerate(self.theta):
                    v = vals[i, k]
                    w.writerow([fmt(r), fmt(t), fmt(v.real), fmt(v.imag)])


def axial_grid(model: ManifoldModel, n_theta: int = N_THETA):
    theta, sw = axial_quadrature(model.dimension, n_theta)
    return model.grid.nodes, theta, sw


def field_from_profile(model: ManifoldModel, profile, R: float, n_theta: int = N_THETA, label: str = "") -> AxialField:
    """Translate of an arbitrary callable radial profile to distance ``R``."""
    _require_hyperbolic(model)
    if R < 0:
        raise InputError("translate distance must be nonnegative")
    r, theta, sw = axial_grid(model, n_theta)
    d = hyperbolic_distance(r[:, None], R, theta[None, :])
    return AxialField(float(R), np.asarray(profile(d)), r, theta, sw, label)


def translate_radial(model: ManifoldModel, f: RadialFunction, R: float, n_theta: int = N_THETA) -> AxialField:
    """``tau_R f``: the profile re-centred at distance R along the axis."""
    check_on_model(model, f)
    return field_from_profile(model, f, R, n_theta, label=f"tau_{R:g}({f.label})")


def translated_transform(model: ManifoldModel, field: AxialField, lam) -> complex:
    """Spherical transform of ``field`` based at its translate centre."""
    _require_hyperbolic(model)
    R = field.center_distance
    d = hyperbolic_distance(field.r_nodes[:, None], R, field.theta[None, :])
    grid, vals = eigenfunction_profile(model, lam, float(d.max()) + 1.0)
    phi = grid.interpolate(vals, d)
    return complex(field.integrate(model, field.values * phi))
