"""Radial eigenfunctions, the c-function and inversion calibration.

The radial eigen-equation ``u'' + (A'/A) u' + (lambda^2 + rho^2) u = 0`` is
integrated for ``w = exp(rho r) u``, which stays bounded for real lambda, after
a series start-up at ``r0 = 1e-4`` that fixes ``u(0) = 1, u'(0) = 0``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InputError, NumericalError, StateError
from .model import ManifoldModel, fmt
from .quadrature import RadialGrid, trapezoid_weights

R_START = 1e-4
RTOL = 1e-12
ATOL = 1e-14
C_MIN_LAMBDA = 0.05


def _series(model: ManifoldModel, k: np.ndarray, r: np.ndarray):
    """Power series of the regular solution through O(r^4)."""
    n = model.dimension
    alpha = model.small_r_curvature
    b = -k / (2 * n)
    c4 = k * (k + 4 * alpha) / (8 * n * (n + 2))
    r = r[None, :]
    b = b[:, None]
    c4 = c4[:, None]
    u = 1 + b * r**2 + c4 * r**4
    du = 2 * b * r + 4 * c4 * r**3
    return u, du


def solve_radial_ode(model: ManifoldModel, lambdas, radii, rtol: float = RTOL):
    """Values and radial derivatives of ``phi_lambda`` at sorted ``radii``.

    Integrates every lambda in one vectorised system so that the step
    sequence, and hence the discretisation error, varies smoothly in lambda.

    Returns
    -------
    u, du : ndarray, shape (len(lambdas), len(radii))
    """
    lam = np.atleast_1d(np.asarray(lambdas))
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or np.any(np.diff(radii) < 0) or (radii.size and radii[0] < 0):
        raise InputError("radii must be a sorted 1-D array of nonnegative values")
    if np.any(np.abs(lam) >= 1e4):
        raise InputError("|lambda| must be below 1e4")
    is_complex = np.iscomplexobj(lam) and np.any(lam.imag != 0)
    dtype = complex if is_complex else float
    lam = lam.astype(dtype)
    rho = model.rho
    k = lam**2 + rho**2
    m = lam.size

    u = np.empty((m, radii.size), dtype=dtype)
    du = np.empty_like(u)
    small = radii < R_START
    if np.any(small):
        u[:, small], du[:, small] = _series(model, k, radii[small])
    far = ~small
    if not np.any(far):
        return u, du

    u0, du0 = _series(model, k, np.array([R_START]))
    scale = math.exp(rho * R_START)
    y0 = np.concatenate([scale * u0[:, 0], scale * (du0[:, 0] + rho * u0[:, 0])])
    dlog = model.log_density_derivative
    kw = lam**2 + 2 * rho**2

    def rhs(r, y):
        a = float(dlog(np.array([r]))[0])
        w = y[:m]
        dw = y[m:]
        return np.concatenate([dw, -(a - 2 * rho) * dw - (kw - a * rho) * w])

    targets = radii[far]
    sol = solve_ivp(
        rhs,
        (R_START, float(targets[-1])),
        y0,
        method="DOP853",
        t_eval=targets,
        rtol=rtol,
        atol=ATOL,
    )
    if sol.status != 0 or sol.y.shape[1] != targets.size:
        raise NumericalError(
            f"radial ODE integration failed: {sol.message} "
            f"(lambda range {np.min(np.abs(lam)):.3g}..{np.max(np.abs(lam)):.3g}, "
            f"reached r={sol.t[-1] if sol.t.size else R_START:.3g})"
        )
    damp = np.exp(-rho * targets)
    w = sol.y[:m]
    dw = sol.y[m:]
    u[:, far] = w * damp
    du[:, far] = (dw - rho * w) * damp
    return u, du


@dataclass
class RadialEigenfunction:
    """``phi_lambda`` sampled on a model grid."""

    lam: complex
    values: np.ndarray
    derivative_values: np.ndarray
    ode_residual: float
    grid: RadialGrid

    def __call__(self, r):
        return self.grid.interpolate(self.values, r)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "re_phi", "im_phi", "re_dphi", "im_dphi"])
            v = np.asarray(self.values, dtype=complex)
            d = np.asarray(self.derivative_values, dtype=complex)
            for r, a, b in zip(self.grid.nodes, v, d):
                w.writerow([fmt(r), fmt(a.real), fmt(a.imag), fmt(b.real), fmt(b.imag)])


def ode_residual(model: ManifoldModel, lam, u, du, grid: RadialGrid, r_min: float = 0.01):
    """Pointwise residual of the eigen-equation, ``u''`` from spectral differentiation."""
    r = grid.nodes
    d2u = grid.differentiate(du)
    res = d2u + model.log_density_derivative(r) * du + (lam**2 + model.rho**2) * u
    return np.where(r >= r_min, np.abs(res), 0.0)


def radial_eigenfunction(model: ManifoldModel, lam) -> RadialEigenfunction:
    """Solve for ``phi_lambda`` on the model grid."""
    lam = complex(lam)
    arg = lam.real if lam.imag == 0 else lam
    u, du = solve_radial_ode(model, np.array([arg]), model.grid.nodes)
    u, du = u[0], du[0]
    res = ode_residual(model, arg, u, du, model.grid)
    return RadialEigenfunction(lam, u, du, float(res.max()), model.grid)


def eigenfunction_at(model: ManifoldModel, lam, r) -> np.ndarray:
    """``phi_lambda(r)`` at arbitrary radii (any order, any shape)."""
    r = np.asarray(r, dtype=float)
    flat = r.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    lam = complex(lam)
    arg = lam.real if lam.imag == 0 else lam
    u, _ = solve_radial_ode(model, np.array([arg]), uniq)
    return u[0][inv].reshape(r.shape)


def extended_grid(r_extent: float, panel_width: float = 0.25, order: int = 16) -> RadialGrid:
    panels = max(1, int(math.ceil(r_extent / panel_width)))
    return RadialGrid(float(r_extent), panels, order)


def eigenfunction_profile(model: ManifoldModel, lam, r_extent: float):
    """``phi_lambda`` on a Gauss-Legendre grid reaching ``r_extent``.

    Used where profiles are needed beyond ``r_max`` (kernel-side operators).
    Returns ``(grid, values)``.
    """
    lam = complex(lam)
    width = min(0.25, 2.0 / max(abs(lam), 1e-12))
    grid = extended_grid(r_extent, width)
    arg = lam.real if lam.imag == 0 else lam
    u, _ = solve_radial_ode(model, np.array([arg]), grid.nodes)
    return grid, u[0]


# --- c-function ------------------------------------------------------------


@dataclass
class CFunctionSample:
    lam: float
    c_value: complex
    fit_residual: float


def fit_radii(model: ManifoldModel) -> tuple[float, float]:
    return 0.8 * model.r_max, 0.9 * model.r_max


def _c_from_asymptotics(lam, w, dw, r):
    """Solve ``w = c e^{i lam r} + c(-lam) e^{-i lam r}`` together with its derivative."""
    return 0.5 * (w - 1j * dw / lam) * np.exp(-1j * lam * r)


def _c_pair(model, lam, u1, du1, u2, du2):
    r1, r2 = fit_radii(model)
    rho = model.rho
    w1, w2 = u1 * math.exp(rho * r1), u2 * math.exp(rho * r2)
    dw1 = (du1 + rho * u1) * math.exp(rho * r1)
    dw2 = (du2 + rho * u2) * math.exp(rho * r2)
    c1 = _c_from_asymptotics(lam, w1, dw1, r1)
    c2 = _c_from_asymptotics(lam, w2, dw2, r2)
    return c1, c2


def c_function(model: ManifoldModel, lam: float) -> CFunctionSample:
    """Extract ``c(lambda)`` from ``phi_lambda(r) e^{rho r} ~ c(l) e^{ilr} + c(-l) e^{-ilr}``.

    The two-term fit is solved at ``r1 = 0.8 r_max`` and ``r2 = 0.9 r_max`` from
    value and derivative; the mean is returned and the relative disagreement
    is the fit residual.
    """
    if isinstance(lam, complex):
        if lam.imag != 0:
            raise InputError("c-function samples are only computed for real lambda")
        lam = lam.real
    lam = float(lam)
    if abs(lam) < C_MIN_LAMBDA:
        raise NumericalError(
            f"c(lambda) is ill-conditioned for |lambda| < {C_MIN_LAMBDA} (got {lam})"
        )
    r1, r2 = fit_radii(model)
    u, du = solve_radial_ode(model, np.array([lam]), np.array([r1, r2]))
    c1, c2 = _c_pair(model, lam, u[0, 0], du[0, 0], u[0, 1], du[0, 1])
    c = 0.5 * (c1 + c2)
    if not np.isfinite(c) or c == 0:
        raise NumericalError(f"singular c-function fit at lambda={lam}")
    return CFunctionSample(lam, complex(c), float(abs(c1 - c2) / abs(c)))


def c_function_table(model: ManifoldModel, lambdas) -> list[CFunctionSample]:
    """Vectorised :func:`c_function` over many real lambdas."""
    lam = np.asarray(lambdas, dtype=float)
    if np.any(np.abs(lam) < C_MIN_LAMBDA):
        raise NumericalError(f"c(lambda) is ill-conditioned for |lambda| < {C_MIN_LAMBDA}")
    r1, r2 = fit_radii(model)
    u, du = solve_radial_ode(model, lam, np.array([r1, r2]))
    c1, c2 = _c_pair(model, lam, u[:, 0], du[:, 0], u[:, 1], du[:, 1])
    c = 0.5 * (c1 + c2)
    return [CFunctionSample(float(l), complex(ci), float(abs(a - b) / abs(ci)))
            for l, ci, a, b in zip(lam, c, c1, c2)]


def write_c_table(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "re_c", "im_c", "residual"])
        for s in samples:
            w.writerow([fmt(s.lam), fmt(s.c_value.real), fmt(s.c_value.imag), fmt(s.fit_residual)])


def fit_c_constants(model: ManifoldModel, lambdas, K: float = 1.0) -> float:
    """Smallest ``C`` with ``|c|^{-1}`` within a factor ``C`` of the model powers of lambda.

    Uses ``|lambda|`` below ``K`` and ``|lambda|^{(n-1)/2}`` above it.
    """
    samples = c_function_table(model, lambdas)
    lam = np.array([abs(s.lam) for s in samples])
    inv = np.array([1.0 / abs(s.c_value) for s in samples])
    power = np.where(lam <= K, lam, lam ** ((model.dimension - 1) / 2))
    ratio = inv / power
    return float(max(ratio.max(), 1.0 / ratio.min()))


# --- spectral table and inversion weight -------------------------------------


@dataclass
class SpectralTable:
    """Eigenfunctions on the model grid for a set of real lambdas."""

    lambdas: np.ndarray
    phi: np.ndarray  # (n_lambda, n_grid)
    raw_weight: np.ndarray  # |c(lambda)|^{-2}, zero at lambda = 0
    quad: np.ndarray  # trapezoid weights in lambda


def spectral_table(model: ManifoldModel, lambdas=None) -> SpectralTable:
    """Cached eigenfunction table; defaults to the model's spectral grid."""
    if lambdas is None:
        lambdas = model.spectral.nodes
    lambdas = np.asarray(lambdas, dtype=float)
    key = ("table", lambdas.size, float(lambdas[0]), float(lambdas[-1]), hash(lambdas.tobytes()))
    cached = model._cache.get(key)
    if cached is not None:
        return cached
    if lambdas[0] != 0.0 or np.any(np.diff(lambdas) <= 0):
        raise InputError("spectral nodes must be increasing and start at 0")
    if not np.allclose(np.diff(lambdas), lambdas[1] - lambdas[0], rtol=1e-9, atol=0):
        raise InputError("spectral nodes must be uniform")
    nodes = model.grid.nodes
    r1, r2 = fit_radii(model)
    radii = np.concatenate([nodes, [r1, r2]])
    order = np.argsort(radii, kind="stable")
    u, du = solve_radial_ode(model, lambdas, radii[order])
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    u = u[:, inv]
    du = du[:, inv]
    phi = np.ascontiguousarray(u[:, : nodes.size])
    pos = lambdas > 0
    raw = np.zeros_like(lambdas)
    lp = lambdas[pos]
    c1, c2 = _c_pair(model, lp, u[pos, -2], du[pos, -2], u[pos, -1], du[pos, -1])
    raw[pos] = 1.0 / np.abs(0.5 * (c1 + c2)) ** 2
    table = SpectralTable(lambdas, phi, raw, trapezoid_weights(lambdas))
    model._cache[key] = table
    return table


def require_calibration(model: ManifoldModel) -> float:
    if model.kappa is None:
        raise StateError("model is not calibrated; run calibrate_inversion(model) first")
    return model.kappa


def plancherel_weight(model: ManifoldModel, lam):
    """``kappa |c(lambda)|^{-2}`` for real lambda (scalar or array)."""
    kappa = require_calibration(model)
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    samples = c_function_table(model, np.abs(lam_arr))
    w = kappa / np.array([abs(s.c_value) ** 2 for s in samples])
    return float(w[0]) if np.ndim(lam) == 0 else w


def _raw_roundtrip(model: ManifoldModel, f: np.ndarray, weight: np.ndarray):
    table = spectral_table(model)
    vw = model.volume_weights
    fhat = table.phi @ (vw * f)
    return table.phi.T @ (table.quad * weight * fhat)


def calibrate_inversion(model: ManifoldModel, weight_fn=None, width: float = 1.0) -> float:
    """Fit the inversion constant ``kappa`` by a least-squares round trip.

    The reference bump ``exp(-(r/width)^2)`` is transformed and inverted with
    weight ``|c|^{-2}`` (or ``weight_fn(lambda)`` when given); ``kappa``
    minimises the L^2 round-trip defect and is stored on the model only when
    ``weight_fn`` is None.
    """
    table = spectral_table(model)
    weight = table.raw_weight if weight_fn is None else np.asarray(weight_fn(table.lambdas), float)
    r = model.grid.nodes
    f = np.exp(-((r / width) ** 2))
    g = _raw_roundtrip(model, f, weight)
    vw = model.volume_weights
    gg = float(np.sum(vw * g * g))
    if not gg > 0:
        raise NumericalError("calibration round trip vanished")
    kappa = float(np.sum(vw * g * f)) / gg
    defect = math.sqrt(np.sum(vw * (kappa * g - f) ** 2) / np.sum(vw * f * f))
    if not kappa > 0 or not defect < 1e-3:
        raise NumericalError(f"calibration failed: kappa={kappa:.6g}, defect={defect:.3g}")
    if weight_fn is None:
        model.kappa = kappa
        model._cache["calibration_defect"] = defect
    return kappa
