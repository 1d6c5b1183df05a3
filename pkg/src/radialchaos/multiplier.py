"""Radial L^p multipliers: symbols on the strip, application, and symbol extraction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ._spatial import sphere_average_matrix
from .convolution import (
    KernelQuadrature,
    RadialMeasure,
    _phi_at_radii,
    apply_kernel_spatial,
    atom_quadrature,
    kernel_quadrature,
    measure_kernel_quadrature,
    measure_symbol,
    normalized_bump,
)
from .eigen import RadialEigenfunction, extended_grid, require_calibration, solve_radial_ode
from .errors import (
    DomainError,
    InputError,
    NumericalError,
    ProbeZeroError,
    TruncationError,
    UnsupportedModelError,
)
from .model import ManifoldModel, RadialFunction, check_on_model, read_radial_csv, strip_halfwidth
from .quadrature import RadialGrid
from .transform import SpectralFunction, holomorphy_halfwidth, inverse_transform, spherical_transform

HEAT = "heat"
SPHERE_MEAN = "sphere_mean"
CONV_KERNEL = "conv_kernel"
CONV_MEASURE = "conv_measure"
CUSTOM_SYMBOL = "custom_symbol"
KINDS = (HEAT, SPHERE_MEAN, CONV_KERNEL, CONV_MEASURE, CUSTOM_SYMBOL)

HEAT_T_MIN = 0.01
PROBE_ZERO = 1e-9
# log of the relative size below which heat-kernel shells are dropped
HEAT_REACH_LOG = 40.0
KERNEL_PANEL = 0.5
KERNEL_ORDER = 8


@dataclass(frozen=True, eq=False)
class Multiplier:
    """A radial multiplier described by its kind and parameters.

    Use the constructors :meth:`heat`, :meth:`sphere_mean`, :meth:`conv_kernel`,
    :meth:`conv_measure`, :meth:`custom` rather than the raw fields.
    """

    kind: str
    t: Optional[float] = None
    r0: Optional[float] = None
    kernel: Optional[RadialFunction] = None
    measure: Optional[RadialMeasure] = None
    symbol_fn: Optional[Callable] = None
    declared_halfwidth: float = math.inf
    descriptor: dict = field(default_factory=dict)

    @classmethod
    def heat(cls, t: float) -> "Multiplier":
        if not t > 0:
            raise InputError(f"heat time must be positive, got {t!r}")
        return cls(HEAT, t=float(t), descriptor={"kind": HEAT, "t": float(t)})

    @classmethod
    def sphere_mean(cls, r0: float) -> "Multiplier":
        if not r0 >= 0:
            raise InputError(f"sphere radius must be nonnegative, got {r0!r}")
        return cls(SPHERE_MEAN, r0=float(r0), descriptor={"kind": SPHERE_MEAN, "r0": float(r0)})

    @classmethod
    def conv_kernel(cls, g: RadialFunction, csv: Optional[str] = None) -> "Multiplier":
        return cls(CONV_KERNEL, kernel=g, descriptor={"kind": CONV_KERNEL, "csv": csv})

    @classmethod
    def conv_measure(cls, mu: RadialMeasure, density_csv: Optional[str] = None) -> "Multiplier":
        return cls(CONV_MEASURE, measure=mu, descriptor={"kind": CONV_MEASURE, "measure": mu.to_json(density_csv)})

    @classmethod
    def identity(cls) -> "Multiplier":
        return cls.conv_measure(RadialMeasure.unit_atom(0.0))

    @classmethod
    def custom(cls, fn: Callable, halfwidth: float, label: str = "custom") -> "Multiplier":
        """Symbol given as a callable, declared holomorphic on ``|Im lambda| < halfwidth``.

        Boundedness on L^p cannot be checked from samples and is taken on trust.
        """
        if not halfwidth > 0:
            raise InputError("custom symbol needs a positive strip halfwidth")
        return cls(CUSTOM_SYMBOL, symbol_fn=fn, declared_halfwidth=float(halfwidth),
                   descriptor={"kind": CUSTOM_SYMBOL, "label": label})

    def strip_halfwidth(self, model: ManifoldModel) -> float:
        if self.kind in (HEAT, SPHERE_MEAN):
            return math.inf
        if self.kind == CONV_KERNEL:
            return holomorphy_halfwidth(model, self.kernel)
        if self.kind == CONV_MEASURE:
            hw = model.rho
            if self.measure.density_part is not None:
                hw = min(hw, holomorphy_halfwidth(model, self.measure.density_part))
            return hw
        return self.declared_halfwidth

    def to_json(self) -> dict:
        return dict(self.descriptor)

    def __repr__(self) -> str:
        return f"Multiplier({self.descriptor})"


def multiplier_from_json(model: ManifoldModel, obj, base_dir=".") -> Multiplier:
    """Parse a multiplier descriptor (dict, JSON text file path)."""
    if isinstance(obj, (str, Path)):
        base_dir = Path(obj).parent
        try:
            with open(obj) as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read multiplier file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed multiplier JSON: {exc}") from None
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InputError("multiplier descriptor needs a 'kind'")
    kind = obj["kind"]
    try:
        if kind == HEAT:
            return Multiplier.heat(float(obj["t"]))
        if kind == SPHERE_MEAN:
            return Multiplier.sphere_mean(float(obj["r0"]))
        if kind == CONV_KERNEL:
            g = read_radial_csv(Path(base_dir) / obj["csv"], model)
            return Multiplier.conv_kernel(g, obj["csv"])
        if kind == CONV_MEASURE:
            mu = RadialMeasure.from_json(model, obj["measure"], base_dir)
            return Multiplier.conv_measure(mu, obj["measure"].get("density_csv"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed {kind} descriptor: {exc!r}") from None
    if kind == CUSTOM_SYMBOL:
        raise InputError("custom symbols can only be built from Python")
    raise InputError(f"unknown multiplier kind {kind!r}")


# --- symbols ---------------------------------------------------------------


def _real_if_possible(lam):
    lam = np.asarray(lam)
    if np.iscomplexobj(lam) and np.all(lam.imag == 0):
        return lam.real
    return lam


def symbol_eval(model: ManifoldModel, T: Multiplier, lam):
    """``m_T(lambda)`` for scalar or array ``lambda`` inside the declared strip."""
    scalar = np.ndim(lam) == 0
    lam_arr = np.atleast_1d(np.asarray(lam))
    hw = T.strip_halfwidth(model)
    if np.any(np.abs(np.imag(lam_arr)) >= hw):
        raise DomainError(f"symbol of {T!r} is only defined for |Im lambda| < {hw:g}")
    if T.kind == HEAT:
        out = np.exp(-T.t * (lam_arr**2 + model.rho**2))
    elif T.kind == SPHERE_MEAN:
        out = _phi_at_radii(model, _real_if_possible(lam_arr), [T.r0])[:, 0]
    elif T.kind == CONV_KERNEL:
        out = spherical_transform(model, T.kernel, lam_arr).values
    elif T.kind == CONV_MEASURE:
        out = measure_symbol(model, T.measure, lam_arr)
    else:
        out = np.asarray([complex(T.symbol_fn(complex(x))) for x in lam_arr])
    return out[0] if scalar else out


def symbol_on_grid(model: ManifoldModel, T: Multiplier) -> np.ndarray:
    """Symbol on the model's real spectral grid (uses the cached eigenfunction table)."""
    nodes = model.spectral.nodes
    if T.kind == HEAT:
        return np.exp(-T.t * (nodes**2 + model.rho**2))
    if T.kind == SPHERE_MEAN:
        return _phi_at_radii(model, nodes, [T.r0])[:, 0]
    if T.kind == CONV_KERNEL:
        return spherical_transform(model, T.kernel).values
    if T.kind == CONV_MEASURE:
        return measure_symbol(model, T.measure)
    return symbol_eval(model, T, nodes)


# --- heat kernel -----------------------------------------------------------


def heat_kernel_profile(model: ManifoldModel, t: float) -> RadialFunction:
    """``h_t`` by inverting ``exp(-t(lambda^2 + rho^2))`` on the spectral grid."""
    if not t > 0:
        raise InputError(f"heat time must be positive, got {t!r}")
    if t < HEAT_T_MIN:
        raise TruncationError(
            f"heat symbol at t={t:g} decays too slowly for the spectral window; need t >= {HEAT_T_MIN}"
        )
    key = ("heat_kernel", float(t))
    if key not in model._cache:
        require_calibration(model)
        nodes = model.spectral.nodes
        spec = SpectralFunction(nodes, np.exp(-t * (nodes**2 + model.rho**2)), math.inf, f"heat({t:g})")
        h = inverse_transform(model, spec, label=f"h_{t:g}")
        h.profile = h.profile.real
        model._cache[key] = h
    return model._cache[key]


def heat_reach(model: ManifoldModel, t: float) -> float:
    """Radius beyond which ``h_t A`` is below ``exp(-HEAT_REACH_LOG)`` of its peak."""
    return 2.0 * model.rho * t + math.sqrt(4.0 * t * HEAT_REACH_LOG)


# --- kernel-side realisation -------------------------------------------------


def kernel_realization(model: ManifoldModel, T: Multiplier) -> KernelQuadrature:
    """Shell quadrature of the convolution kernel (or measure) of ``T``."""
    if not model.is_hyperbolic:
        raise UnsupportedModelError("kernel-side application needs a hyperbolic model")
    if T.kind == CUSTOM_SYMBOL:
        raise UnsupportedModelError("custom symbols have no kernel realisation")
    key = ("kernel", T.kind, T.t, T.r0, id(T.kernel), id(T.measure))
    if key in model._cache:
        return model._cache[key]
    if T.kind == HEAT:
        h = heat_kernel_profile(model, T.t)
        reach = min(model.r_max, heat_reach(model, T.t))
        kq = kernel_quadrature(model, h, panel_width=KERNEL_PANEL, reach=reach, order=KERNEL_ORDER)
    elif T.kind == SPHERE_MEAN:
        kq = atom_quadrature([(T.r0, 1.0)])
    elif T.kind == CONV_KERNEL:
        kq = kernel_quadrature(model, T.kernel)
    else:
        kq = measure_kernel_quadrature(model, T.measure)
    model._cache[key] = kq
    return kq


def apply_kernel_to_profile(model: ManifoldModel, T: Multiplier, grid: RadialGrid, values, eval_radii) -> np.ndarray:
    """``(T u)(x)`` at ``|x|`` in ``eval_radii`` for a radial profile ``u`` given on ``grid``."""
    kq = kernel_realization(model, T)
    return apply_kernel_spatial(model, kq, grid, values, eval_radii)


def kernel_matrix(model: ManifoldModel, T: Multiplier, grid: RadialGrid, eval_radii=None) -> np.ndarray:
    """Matrix of ``T`` acting on node values of ``grid`` (rows at ``eval_radii``, default the grid nodes)."""
    kq = kernel_realization(model, T)
    D = grid.nodes if eval_radii is None else np.asarray(eval_radii, float)
    return sphere_average_matrix(grid, D, kq.s, kq.coef, model.dimension)


def _half_grid(model: ManifoldModel) -> RadialGrid:
    g = model.grid
    panels = max(1, g.panels // 2)
    return RadialGrid(g.r_max * panels / g.panels, panels, g.order)


def apply_multiplier(model: ManifoldModel, T: Multiplier, f, method: str = "auto"):
    """Apply ``T`` to a radial function.

    ``method='spectral'`` multiplies the transform by the symbol and inverts;
    ``method='kernel'`` integrates against the kernel over geodesic spheres;
    ``'auto'`` tries spectral and falls back to the kernel on truncation.

    A :class:`RadialEigenfunction` (not decaying, so without a spectral
    transform) is always handled kernel-side and the result is returned on
    the half-range grid ``r <= r_max / 2``.
    """
    if method not in ("auto", "spectral", "kernel"):
        raise InputError(f"unknown method {method!r}")
    if isinstance(f, RadialEigenfunction):
        lam = _real_if_possible(np.asarray(f.lam))
        target = _half_grid(model)
        kq = kernel_realization(model, T)
        extent = target.r_max + kq.reach + 1.0
        grid = extended_grid(extent, min(0.25, 2.0 / max(abs(complex(f.lam)), 1e-12)))
        u, _ = solve_radial_ode(model, np.atleast_1d(lam), grid.nodes)
        vals = apply_kernel_spatial(model, kq, grid, u[0], target.nodes)
        return RadialFunction(vals, target, f"T(phi_{complex(f.lam)})")
    check_on_model(model, f)
    if method in ("auto", "spectral"):
        try:
            require_calibration(model)
            fh = spherical_transform(model, f)
            out = inverse_transform(model, fh * symbol_on_grid(model, T), label=f"T({f.label})")
            if T.kind in (HEAT, SPHERE_MEAN) and not np.iscomplexobj(f.profile):
                out.profile = out.profile.real
            return out
        except TruncationError:
            if method == "spectral" or not model.is_hyperbolic or T.kind == CUSTOM_SYMBOL:
                raise
    vals = apply_kernel_to_profile(model, T, model.grid, f.profile, model.grid.nodes)
    if not np.iscomplexobj(f.profile) and np.all(np.isreal(kernel_realization(model, T).coef)):
        vals = vals.real
    return RadialFunction(vals, model.grid, f"T({f.label})")


def kernel_operator(model: ManifoldModel, T: Multiplier) -> Callable[[RadialFunction], RadialFunction]:
    """``T`` as a black-box radial operator applied kernel-side."""
    return lambda f: apply_multiplier(model, T, f, method="kernel")


# --- extraction and nonconstancy ---------------------------------------------


def extract_symbol(model: ManifoldModel, apply_fn, lambdas, probe: Optional[RadialFunction] = None) -> SpectralFunction:
    """Recover ``m(lambda) = (T phi)^(lambda) / phi^(lambda)`` for a black-box ``T``.

    The default probe is the unit-mass Gaussian bump of width 1.
    """
    lam = np.atleast_1d(np.asarray(lambdas))
    probe = normalized_bump(model, 1.0) if probe is None else probe
    ph = spherical_transform(model, probe, lam)
    for x, v in zip(lam, ph.values):
        if abs(v) < PROBE_ZERO:
            raise ProbeZeroError(x, v)
    image = apply_fn(probe)
    th = spherical_transform(model, image, lam)
    return SpectralFunction(lam, th.values / ph.values, min(ph.strip_halfwidth, th.strip_halfwidth), "extracted")


def strip_sample(model: ManifoldModel, p: float, halfwidth: float = math.inf, count: int = 64) -> np.ndarray:
    """``count`` points of S_p (8 columns in Re, rows inside the strip)."""
    hw = min(strip_halfwidth(model, p), halfwidth)
    side = int(round(math.sqrt(count)))
    re = np.linspace(0.0, 4.0, side)
    im = np.linspace(-0.9 * hw, 0.9 * hw, count // side)
    return (re[None, :] + 1j * im[:, None]).ravel()


def nonconstancy_check(model: ManifoldModel, T: Multiplier, p: float) -> bool:
    """True iff ``|m_T|`` varies over a 64-point sample of S_p."""
    pts = strip_sample(model, p, T.strip_halfwidth(model))
    mag = np.abs(symbol_eval(model, T, pts))
    return bool(mag.max() - mag.min() > 1e-9 * (1.0 + mag.max()))
