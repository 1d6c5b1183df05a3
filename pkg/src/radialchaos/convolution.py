"""Convolution with radial functions and radial measures.

The general route is Fourier-side (multiply transforms, invert) and works
for any density model. The spatial route integrates over geodesic spheres
and exists on hyperbolic models only, where it serves as an oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._spatial import sphere_average_apply
from .eigen import require_calibration, solve_radial_ode, spectral_table
from .errors import InputError, UnsupportedModelError
from .model import ManifoldModel, RadialFunction, check_on_model, hyperbolic_distance, lp_norm_radial, read_radial_csv
from .quadrature import RadialGrid, composite_gauss_legendre
from .transform import AxialField, inverse_transform, spherical_transform

KERNEL_CUTOFF = 1e-17


def normalized_bump(model: ManifoldModel, width: float) -> RadialFunction:
    """Gaussian ``exp(-(r/width)^2)`` scaled to unit mass against dvol."""
    r = model.grid.nodes
    g = np.exp(-((r / width) ** 2))
    mass = float(np.sum(model.volume_weights * g))
    return RadialFunction(g / mass, model.grid, f"bump({width:g})", nonnegative=True)


def convolve_radial(model: ManifoldModel, f: RadialFunction, g: RadialFunction) -> RadialFunction:
    """``f * g`` via ``(f*g)^ = f^ g^`` and inversion."""
    require_calibration(model)
    fh = spherical_transform(model, f)
    gh = spherical_transform(model, g)
    out = inverse_transform(model, fh * gh, label=f"{f.label}*{g.label}")
    if not (np.iscomplexobj(f.profile) or np.iscomplexobj(g.profile)):
        out.profile = out.profile.real
    return out


# --- spatial route ---------------------------------------------------------


@dataclass
class KernelQuadrature:
    """Radial kernel as sphere-shell nodes ``s_j`` with coefficients ``w_j A(s_j) g(s_j)``.

    Atoms add sphere averages at radius ``r_k`` with mass ``m_k``.
    """

    s: np.ndarray
    coef: np.ndarray
    reach: float

    def __add__(self, other: "KernelQuadrature") -> "KernelQuadrature":
        return KernelQuadrature(
            np.concatenate([self.s, other.s]),
            np.concatenate([self.coef, other.coef]),
            max(self.reach, other.reach),
        )


def kernel_quadrature(
    model: ManifoldModel,
    g: RadialFunction,
    panel_width: Optional[float] = None,
    cutoff: float = KERNEL_CUTOFF,
    reach: Optional[float] = None,
    order: int = 16,
) -> KernelQuadrature:
    """Shell quadrature for a radial kernel, truncated where ``|g| A`` is negligible.

    With ``panel_width=None`` the model grid nodes are used as they are;
    otherwise the kernel is resampled on coarser Gauss-Legendre panels,
    which is only accurate for smooth kernels. An explicit ``reach``
    overrides the cutoff (useful when the far tail is numerical noise).
    """
    check_on_model(model, g)
    grid = model.grid
    gA = np.abs(g.profile) * model.density(grid.nodes)
    top = gA.max()
    if top == 0:
        return KernelQuadrature(np.zeros(0), np.zeros(0, complex), 0.0)
    if reach is None:
        big = np.nonzero(gA > cutoff * top)[0]
        last_panel = min(grid.panels - 1, big[-1] // grid.order + 1)
    else:
        last_panel = min(grid.panels - 1, int(np.searchsorted(grid.edges, reach)) - 1)
    reach = float(grid.edges[last_panel + 1])
    if panel_width is None:
        sel = slice(0, (last_panel + 1) * grid.order)
        s = grid.nodes[sel]
        coef = grid.weights[sel] * model.density(s) * g.profile[sel]
    else:
        panels = max(1, int(math.ceil(reach / panel_width)))
        s, w = composite_gauss_legendre(0.0, reach, panels, order)
        coef = w * model.density(s) * g(s)
    return KernelQuadrature(s, np.asarray(coef, complex), reach)


def atom_quadrature(atoms) -> KernelQuadrature:
    if not atoms:
        return KernelQuadrature(np.zeros(0), np.zeros(0, complex), 0.0)
    r = np.array([a[0] for a in atoms], float)
    m = np.array([a[1] for a in atoms], complex)
    return KernelQuadrature(r, m, float(r.max()))


def _require_hyperbolic(model):
    if not model.is_hyperbolic:
        raise UnsupportedModelError("spatial convolution needs a hyperbolic model")


def apply_kernel_spatial(model: ManifoldModel, kq: KernelQuadrature, src: RadialGrid, values, eval_radii):
    """``(u * k)(x)`` for ``|x|`` in ``eval_radii``, ``u`` given on ``src`` (zero beyond it)."""
    _require_hyperbolic(model)
    out = sphere_average_apply(src, values, np.abs(np.asarray(eval_radii, float)), kq.s, kq.coef, model.dimension)
    return out


def convolve_direct(model: ManifoldModel, f, g: RadialFunction, eval_points) -> np.ndarray:
    """``(f*g)(x) = int f(y) g(d(x, y)) dvol(y)`` by direct quadrature.

    ``eval_points`` are signed distances from o along the reference geodesic.
    A radial ``f`` is integrated over geodesic spheres around x; an
    :class:`AxialField` is integrated on its own (r, theta) grid around o.
    """
    _require_hyperbolic(model)
    check_on_model(model, g)
    pts = np.atleast_1d(np.asarray(eval_points, float))
    if isinstance(f, RadialFunction):
        check_on_model(model, f)
        kq = kernel_quadrature(model, g)
        return apply_kernel_spatial(model, kq, model.grid, f.profile, pts)
    if isinstance(f, AxialField):
        out = np.empty(pts.size, complex)
        r = f.r_nodes[:, None]
        for i, D in enumerate(pts):
            theta = f.theta if D >= 0 else np.pi - f.theta
            d = hyperbolic_distance(r, abs(D), theta[None, :])
            out[i] = f.integrate(model, f.values * g(d))
        return out
    raise InputError(f"cannot convolve object of type {type(f).__name__}")


# --- radial measures ---------------------------------------------------------


@dataclass
class RadialMeasure:
    """``g dvol + sum_k m_k sigma_{r_k}`` with ``sigma_r`` the normalised sphere average."""

    density_part: Optional[RadialFunction] = None
    atoms: list = field(default_factory=list)

    def __post_init__(self):
        self.atoms = [(float(r), complex(m)) for r, m in self.atoms]
        for r, _ in self.atoms:
            if r < 0:
                raise InputError("atom radius must be nonnegative")

    @classmethod
    def unit_atom(cls, radius: float = 0.0) -> "RadialMeasure":
        return cls(None, [(radius, 1.0)])

    def total_variation(self, model: ManifoldModel) -> float:
        tv = sum(abs(m) for _, m in self.atoms)
        if self.density_part is not None:
            tv += lp_norm_radial(model, self.density_part, 1.0)
        return float(tv)

    def to_json(self, density_csv: Optional[str] = None) -> dict:
        return {
            "atoms": [{"r": r, "mass_re": m.real, "mass_im": m.imag} for r, m in self.atoms],
            "density_csv": density_csv,
        }

    @classmethod
    def from_json(cls, model: ManifoldModel, obj, base_dir=".") -> "RadialMeasure":
        if isinstance(obj, (str, Path)):
            with open(obj) as fh:
                obj = json.load(fh)
        if not isinstance(obj, dict):
            raise InputError("measure descriptor must be a JSON object")
        try:
            atoms = [(float(a["r"]), complex(float(a.get("mass_re", 0.0)), float(a.get("mass_im", 0.0))))
                     for a in obj.get("atoms", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed atom list: {exc}") from None
        dens = obj.get("density_csv")
        g = read_radial_csv(Path(base_dir) / dens, model) if dens else None
        return cls(g, atoms)


def _phi_at_radii(model: ManifoldModel, lambdas, radii):
    lam = np.asarray(lambdas)
    radii = np.asarray(radii, float)
    nodes = model.spectral.nodes
    if not np.iscomplexobj(lam) and lam.shape == nodes.shape and np.array_equal(lam, nodes):
        table = spectral_table(model)
        return model.grid.interpolate(table.phi, radii)
    if np.iscomplexobj(lam) and np.all(lam.imag == 0):
        lam = lam.real
    order = np.argsort(radii)
    u, _ = solve_radial_ode(model, np.atleast_1d(lam), radii[order])
    out = np.empty_like(u)
    out[:, order] = u
    return out


def measure_symbol(model: ManifoldModel, mu: RadialMeasure, lambdas=None) -> np.ndarray:
    """``m_mu(lambda) = sum_k m_k phi_lambda(r_k) + g^(lambda)``."""
    lam = model.spectral.nodes if lambdas is None else np.atleast_1d(np.asarray(lambdas))
    out = np.zeros(lam.shape, complex)
    if mu.atoms:
        radii = np.array([r for r, _ in mu.atoms])
        masses = np.array([m for _, m in mu.atoms])
        out += _phi_at_radii(model, lam, radii) @ masses
    if mu.density_part is not None:
        out += spherical_transform(model, mu.density_part, None if lambdas is None else lam).values
    if np.all(out.imag == 0) and not np.iscomplexobj(lam):
        return out.real
    return out


def convolve_measure(model: ManifoldModel, f: RadialFunction, mu: RadialMeasure) -> RadialFunction:
    """``f * mu`` Fourier-side with the measure symbol."""
    require_calibration(model)
    for r, _ in mu.atoms:
        if r >= model.r_max / 2:
            raise InputError(f"atom at r={r} exceeds r_max/2 = {model.r_max / 2}")
    fh = spherical_transform(model, f)
    sym = measure_symbol(model, mu)
    out = inverse_transform(model, fh * sym, label=f"{f.label}*mu")
    if not np.iscomplexobj(f.profile) and not np.iscomplexobj(sym):
        out.profile = out.profile.real
    return out


def measure_kernel_quadrature(model: ManifoldModel, mu: RadialMeasure, panel_width=None) -> KernelQuadrature:
    kq = atom_quadrature(mu.atoms)
    if mu.density_part is not None:
        kq = kq + kernel_quadrature(model, mu.density_part, panel_width)
    return kq


# --- Young bound -------------------------------------------------------------


@dataclass
class YoungReport:
    lhs: float
    rhs: float
    passed: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else 0.0


def young_bound_check(
    model: ManifoldModel,
    f: RadialFunction,
    g: RadialFunction,
    p: float,
    rel: float = 1e-6,
    product: Optional[RadialFunction] = None,
) -> YoungReport:
    """Compare ``||f*g||_p`` with ``||f||_p ||g||_1``.

    ``product`` may carry a precomputed ``f*g`` when several exponents are checked.
    """
    if p < 1:
        raise InputError(f"Young's inequality needs p >= 1, got {p!r}")
    fg = convolve_radial(model, f, g) if product is None else product
    lhs = lp_norm_radial(model, fg, p)
    rhs = lp_norm_radial(model, f, p) * lp_norm_radial(model, g, 1.0)
    return YoungReport(lhs, rhs, bool(lhs <= rhs * (1.0 + rel)))
