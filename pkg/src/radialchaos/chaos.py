"""Linear dynamics of ``(1/nu) T``: mixing certificates, periodic points, orbits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .eigen import extended_grid, solve_radial_ode
from .errors import DomainError, InputError, NonconstancyError, ThresholdError, TruncationError, UnsupportedModelError
from .model import ManifoldModel, conjugate_exponent, fmt, hyperbolic_distance, strip_halfwidth
from .multiplier import Multiplier, kernel_matrix, kernel_realization, nonconstancy_check, symbol_eval
from .transform import axial_quadrature

MARGIN = 1e-3
LEVELS = 3
NEWTON_STEP = 1e-6
NEWTON_MAXITER = 100
ROOT_TOL = 1e-10
STRIP_EPS = 1e-9
SEEDS = 8
ORBIT_MAX_STEPS = 200
ORBIT_OVERFLOW = 1e12
PERIODIC_PASS = 1e-2
# radial extent of the domain on which kernel-side iteration runs
PERIODIC_EXTENT = 60.0

DEFAULT_ROTATIONS = (Fraction(0), Fraction(1, 24), Fraction(-1, 24), Fraction(1, 12), Fraction(-1, 12))

MIXING = "mixing_certified"
PERIODIC = "periodic_certified"
CHAOTIC = "chaotic_certified"
INCONCLUSIVE = "inconclusive"


def _require_p(p: float) -> None:
    if not p > 2 or math.isinf(p):
        raise ThresholdError(f"dynamics needs 2 < p < inf, got p={p!r}")


def chaos_threshold(model: ManifoldModel, p: float) -> float:
    """``c_p = 4 rho^2 / (p q)`` with ``q`` the conjugate exponent."""
    _require_p(p)
    return 4.0 * model.rho**2 / (p * conjugate_exponent(p))


def solve_strip_parameter(model: ManifoldModel, p: float, c: complex) -> complex:
    """``lambda = s + it`` in S_p with ``s^2 - t^2 + rho^2 = Re c``.

    ``t`` is placed 80% of the way from the smallest admissible value
    ``sqrt(max(rho^2 - Re c, 0))`` to the strip edge, so ``s > 0`` always.
    """
    cp = chaos_threshold(model, p)
    rc = complex(c).real
    if not rc > cp:
        raise ThresholdError(f"Re c = {rc!r} must exceed c_p = {cp!r}")
    hw = strip_halfwidth(model, p)
    rho2 = model.rho**2
    t_min = math.sqrt(max(rho2 - rc, 0.0))
    t = t_min + 0.8 * (hw - t_min)
    s = math.sqrt(rc + t * t - rho2)
    return complex(s, t)


# --- certificate -------------------------------------------------------------


@dataclass
class RootRecord:
    lam: complex
    rotation: Fraction
    residual: float

    def to_json(self) -> dict:
        return {"lambda_re": self.lam.real, "lambda_im": self.lam.imag,
                "rotation": f"{self.rotation.numerator}/{self.rotation.denominator}",
                "residual": self.residual}


@dataclass
class ChaosCertificate:
    nu: complex
    lambda0: complex
    p: float
    margin: float
    u_plus: np.ndarray
    u_minus: np.ndarray
    roots: list
    not_found: list
    verdict: str
    multiplier: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        pts = lambda a: [[float(z.real), float(z.imag)] for z in a]
        return {
            "nu": [self.nu.real, self.nu.imag],
            "lambda0": [self.lambda0.real, self.lambda0.imag],
            "p": self.p,
            "margin": self.margin,
            "multiplier": self.multiplier,
            "u_plus": pts(self.u_plus),
            "u_minus": pts(self.u_minus),
            "roots": [r.to_json() for r in self.roots],
            "rotations_not_found": [f"{r.numerator}/{r.denominator}" for r in self.not_found],
            "verdict": self.verdict,
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def _disc_samples(lam0: complex, radius: float, level: int) -> np.ndarray:
    nr = 4 * 2 ** (level - 1)
    nt = 8 * 2 ** (level - 1)
    rad = radius * np.arange(1, nr + 1) / nr
    ang = 2 * np.pi * np.arange(nt) / nt
    return (lam0 + rad[:, None] * np.exp(1j * ang[None, :])).ravel()


def _check_pair(model, T, nu, lam0, p):
    _require_p(p)
    hw = strip_halfwidth(model, p)
    lam0 = complex(lam0)
    if abs(lam0.imag) >= hw:
        raise DomainError(f"lambda0 = {lam0} is outside S_p (|Im| < {hw:g})")
    if not nonconstancy_check(model, T, p):
        raise NonconstancyError(f"{T!r} has a constant symbol on S_p")
    m0 = complex(symbol_eval(model, T, lam0))
    if m0 == 0:
        raise InputError("m_T(lambda0) vanishes")
    if abs(abs(nu) - abs(m0)) > 1e-10 * max(1.0, abs(m0)):
        raise InputError(f"|nu| = {abs(nu)!r} differs from |m_T(lambda0)| = {abs(m0)!r}")
    return hw, lam0


def certify_mixing(
    model: ManifoldModel,
    T: Multiplier,
    nu: complex,
    lam0: complex,
    p: float,
    margin: float = MARGIN,
    rotations: Optional[Sequence] = None,
) -> ChaosCertificate:
    """Sample a disc around ``lambda0`` for sub- and super-unit eigenvalues of ``T/nu``.

    Refinement stops at the first level where both region lists are
    nonempty. Unimodular roots are then searched for each rotation.
    """
    nu = complex(nu)
    hw, lam0 = _check_pair(model, T, nu, lam0, p)
    radius = min(1.0, 0.9 * (hw - abs(lam0.imag)))
    samples = np.zeros(0, complex)
    ratios = np.zeros(0)
    for level in range(1, LEVELS + 1):
        pts = _disc_samples(lam0, radius, level)
        pts = pts[np.abs(pts.imag) < hw]
        r = np.abs(symbol_eval(model, T, pts)) / abs(nu)
        samples = np.concatenate([samples, pts])
        ratios = np.concatenate([ratios, r])
        if np.any(ratios <= 1 - margin) and np.any(ratios >= 1 + margin):
            break
    u_plus = samples[ratios <= 1 - margin]
    u_minus = samples[ratios >= 1 + margin]
    rots = DEFAULT_ROTATIONS if rotations is None else rotations
    roots, missing = find_unimodular_roots(model, T, nu, lam0, rots, p, samples=samples)
    both = u_plus.size > 0 and u_minus.size > 0
    if both and len({r.rotation for r in roots}) >= 2:
        verdict = CHAOTIC
    elif both:
        verdict = MIXING
    elif roots:
        verdict = PERIODIC
    else:
        verdict = INCONCLUSIVE
    return ChaosCertificate(nu, lam0, float(p), margin, u_plus, u_minus, roots, missing, verdict, T.to_json())


def _as_fraction(r) -> Fraction:
    if isinstance(r, Fraction):
        return r
    if isinstance(r, str):
        return Fraction(r.strip())
    if isinstance(r, tuple):
        return Fraction(*r)
    return Fraction(r)


def _newton(model, T, target, seed, hw):
    lam = complex(seed)
    for _ in range(NEWTON_MAXITER):
        if abs(lam.imag) >= hw:
            return None
        F = complex(symbol_eval(model, T, lam)) - target
        h = NEWTON_STEP
        probe = symbol_eval(model, T, np.array([lam + h, lam - h]))
        dF = (probe[0] - probe[1]) / (2 * h)
        if dF == 0 or not np.isfinite(dF):
            return None
        step = F / dF
        lam -= step
        if abs(step) < 1e-15 * max(1.0, abs(lam)):
            break
    return lam


def find_unimodular_roots(
    model: ManifoldModel,
    T: Multiplier,
    nu: complex,
    lam0: complex,
    rotations: Sequence,
    p: float,
    samples: Optional[np.ndarray] = None,
):
    """Solve ``m_T(lambda) = nu exp(2 pi i p/q)`` in S_p for each rotation ``p/q``.

    Newton iterations use a central-difference derivative and start from the
    8 disc samples closest to the target value. Returns ``(roots, not_found)``.
    """
    nu = complex(nu)
    _require_p(p)
    hw = strip_halfwidth(model, p)
    lam0 = complex(lam0)
    if samples is None:
        radius = min(1.0, 0.9 * (hw - abs(lam0.imag)))
        samples = _disc_samples(lam0, radius, 1)
        samples = samples[np.abs(samples.imag) < hw]
    samples = np.concatenate([[lam0], samples])
    values = symbol_eval(model, T, samples)
    roots, missing = [], []
    for rot in rotations:
        rot = _as_fraction(rot)
        unit = np.exp(2j * np.pi * float(rot))
        target = nu * unit
        order = np.argsort(np.abs(values - target), kind="stable")
        found = None
        for seed in samples[order[:SEEDS]]:
            lam = _newton(model, T, target, seed, hw)
            if lam is None or not abs(lam.imag) < hw - STRIP_EPS:
                continue
            res = abs(complex(symbol_eval(model, T, lam)) / nu - unit)
            if res < ROOT_TOL:
                found = RootRecord(lam, rot, float(res))
                break
        if found is None:
            missing.append(rot)
        else:
            roots.append(found)
    return roots, missing


# --- periodic points ---------------------------------------------------------


@dataclass
class PeriodicPoint:
    """``phi = sum_j a_j tau_{R_j} phi_{lambda_j}`` with period ``q``."""

    terms: list
    period: int
    rotations: list = field(default_factory=list)

    @property
    def product_period(self) -> int:
        return int(np.prod([r.denominator for r in self.rotations])) if self.rotations else self.period

    def scaled(self, factor) -> "PeriodicPoint":
        return PeriodicPoint([(lam, R, a * factor) for lam, R, a in self.terms], self.period, list(self.rotations))

    def evaluate(self, model: ManifoldModel, r, theta) -> np.ndarray:
        """Value at the point ``(r, theta)`` around o (axis through the centres)."""
        r = np.asarray(r, float)
        theta = np.asarray(theta, float)
        out = np.zeros(np.broadcast(r, theta).shape, complex)
        for lam, R, a in self.terms:
            d = hyperbolic_distance(r, R, theta)
            out += a * _profile_at(model, lam, d)
        return out


def _profile_at(model, lam, d):
    d = np.asarray(d, float)
    flat = d.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    arg = lam.real if complex(lam).imag == 0 else complex(lam)
    u, _ = solve_radial_ode(model, np.array([arg]), uniq)
    return u[0][inv].reshape(d.shape)


def build_periodic_point(roots, centers, coeffs) -> PeriodicPoint:
    """Combine certificate roots into a periodic point with period ``lcm(q_j)``."""
    roots = list(roots)
    if not roots:
        raise InputError("a periodic point needs at least one root")
    if not (len(roots) == len(centers) == len(coeffs)):
        raise InputError("roots, centers and coefficients must have equal length")
    for R in centers:
        if R < 0:
            raise InputError("centre distances must be nonnegative")
    q = 1
    for r in roots:
        q = math.lcm(q, r.rotation.denominator)
    terms = [(complex(r.lam), float(R), complex(a)) for r, R, a in zip(roots, centers, coeffs)]
    return PeriodicPoint(terms, q, [r.rotation for r in roots])


def diagonal_defect(model: ManifoldModel, T: Multiplier, phi: PeriodicPoint, nu: complex, q: Optional[int] = None) -> float:
    """``max_j |a_j ((m(lambda_j)/nu)^q - 1)| / max_j |a_j|``."""
    q = phi.period if q is None else q
    a = np.array([t[2] for t in phi.terms])
    lam = np.array([t[0] for t in phi.terms])
    f = symbol_eval(model, T, lam) / complex(nu)
    return float(np.max(np.abs(a * (f**q - 1))) / np.max(np.abs(a)))


def verify_periodic(
    model: ManifoldModel,
    T: Multiplier,
    phi: PeriodicPoint,
    nu: complex,
    extent: float = PERIODIC_EXTENT,
    n_theta: int = 32,
) -> float:
    """Relative max-norm defect of ``((1/nu) T)^q phi - phi`` on the ball ``r <= r_max/2``.

    Each term is radial about its own centre, and ``T`` commutes with
    translations, so ``T`` is applied kernel-side to the radial profile on an
    extended radial domain and the result re-centred. No symbol values are used.
    """
    if not model.is_hyperbolic:
        raise UnsupportedModelError("kernel-side verification needs a hyperbolic model")
    nu = complex(nu)
    kq = kernel_realization(model, T)
    half = model.r_max / 2
    r_max_center = max(R for _, R, _ in phi.terms)
    if half + r_max_center + kq.reach > extent:
        raise TruncationError(
            f"domain of radius {extent:g} is too small for evaluation radius {half + r_max_center:g}"
            f" and kernel reach {kq.reach:g}"
        )
    grid = extended_grid(extent)
    M = kernel_matrix(model, T, grid) / nu
    r_eval = model.grid.nodes[model.grid.nodes <= half]
    theta, _ = axial_quadrature(model.dimension, n_theta)
    orig = np.zeros((r_eval.size, theta.size), complex)
    iterated = np.zeros_like(orig)
    for lam, R, a in phi.terms:
        arg = lam.real if lam.imag == 0 else lam
        u, _ = solve_radial_ode(model, np.array([arg]), grid.nodes)
        v = u[0].astype(complex)
        for _ in range(phi.period):
            v = M @ v
        d = hyperbolic_distance(r_eval[:, None], R, theta[None, :])
        orig += a * grid.interpolate(u[0], d)
        iterated += a * grid.interpolate(v, d)
    scale = np.max(np.abs(orig))
    return float(np.max(np.abs(iterated - orig)) / scale)


# --- orbits ------------------------------------------------------------------


@dataclass
class OrbitRecord:
    norms: np.ndarray
    moduli: np.ndarray
    measured_factors: np.ndarray
    labels: list
    p: float
    stopped_early: bool = False

    @property
    def log_norms(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.norms)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "norm", "log_norm"])
            for n, (a, b) in enumerate(zip(self.norms, self.log_norms)):
                w.writerow([n, fmt(a), fmt(b)])


def simulate_orbit(
    model: ManifoldModel,
    T: Multiplier,
    nu: complex,
    initial,
    steps: int,
    p: float = 4.0,
) -> OrbitRecord:
    """Evolve ``sum_j a_j phi_{lambda_j}`` under ``(1/nu) T`` for ``steps`` steps.

    Coefficients evolve diagonally. At each step the function is rebuilt on
    the radial grid, its L^p norm recorded, and the coefficients re-measured
    by least squares against the eigenfunction basis, which gives the
    per-component growth factors independently of the symbol.
    ``initial`` is a :class:`PeriodicPoint` or a list of ``(lambda, a)`` /
    ``(lambda, R, a)`` tuples; centres other than 0 are not supported here.
    """
    if steps < 0 or steps > ORBIT_MAX_STEPS:
        raise InputError(f"steps must be in [0, {ORBIT_MAX_STEPS}]")
    _require_p(p)
    hw = strip_halfwidth(model, p)
    terms = initial.terms if isinstance(initial, PeriodicPoint) else list(initial)
    lam, coef = [], []
    for t in terms:
        if len(t) == 3:
            if t[1] != 0:
                raise InputError("orbit simulation works with components centred at o")
            lam.append(complex(t[0]))
            coef.append(complex(t[2]))
        else:
            lam.append(complex(t[0]))
            coef.append(complex(t[1]))
    lam = np.array(lam)
    if np.any(np.abs(lam.imag) >= hw):
        raise DomainError("orbit components must lie in S_p")
    coef = np.array(coef)
    factors = symbol_eval(model, T, lam) / complex(nu)
    arg = lam.real if np.all(lam.imag == 0) else lam
    basis, _ = solve_radial_ode(model, arg, model.grid.nodes)
    basis = basis.T.astype(complex)
    w = model.volume_weights
    sw = np.sqrt(w)[:, None]
    norms = []
    measured = []
    prev = None
    stopped = False
    for n in range(steps + 1):
        v = basis @ coef
        if math.isinf(p):
            nrm = float(np.max(np.abs(v)))
        else:
            nrm = float(np.sum(w * np.abs(v) ** p) ** (1.0 / p))
        norms.append(nrm)
        est = np.linalg.lstsq(sw * basis, np.sqrt(w) * v, rcond=None)[0]
        if prev is not None:
            measured.append(np.abs(est / prev))
        prev = est
        if nrm > ORBIT_OVERFLOW:
            stopped = True
            break
        coef = coef * factors
    labels = [f"lambda={complex(x)}" for x in lam]
    mf = np.array(measured) if measured else np.zeros((0, lam.size))
    return OrbitRecord(np.array(norms), np.abs(factors), mf, labels, float(p), stopped)
