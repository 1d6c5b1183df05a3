import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radialchaos.chaos import (
    CHAOTIC,
    MARGIN,
    ORBIT_MAX_STEPS,
    PeriodicPoint,
    RootRecord,
    build_periodic_point,
    certify_mixing,
    chaos_threshold,
    diagonal_defect,
    find_unimodular_roots,
    simulate_orbit,
    solve_strip_parameter,
    verify_periodic,
)
from radialchaos.errors import DomainError, InputError, NonconstancyError, ThresholdError, UnsupportedModelError
from radialchaos.model import build_model, strip_halfwidth
from radialchaos.multiplier import Multiplier, symbol_eval

NU = math.exp(-1.25)


def heat_root(shift_turns, t=1.0, rho=1.0):
    """Root of exp(-t(lam^2 + rho^2)) = nu exp(2 pi i k) near 0.5, solved as a quadratic."""
    lam = cmath.sqrt(0.25 - 2j * math.pi * shift_turns / t)
    return lam if lam.real > 0 else -lam


@pytest.fixture(scope="module")
def heat1():
    return Multiplier.heat(1.0)


@pytest.fixture(scope="module")
def certificate(h3, heat1):
    return certify_mixing(h3, heat1, NU, 0.5, 4.0)


# --- threshold and strip parameter ------------------------------------------------


def test_threshold_examples(h3, h2):
    assert chaos_threshold(h3, 4.0) == 0.75
    assert chaos_threshold(h3, 1e6) == pytest.approx(4 * (1e6 - 1) / 1e12, rel=1e-12)
    assert chaos_threshold(h3, 1e6) == pytest.approx(4e-6, rel=1e-5)
    assert chaos_threshold(h2, 4.0) == pytest.approx(0.1875, abs=1e-15)


@pytest.mark.parametrize("p", [2.0, 1.5, math.inf])
def test_threshold_domain(h3, p):
    with pytest.raises(ThresholdError):
        chaos_threshold(h3, p)


def test_strip_parameter_examples(h3):
    lam = solve_strip_parameter(h3, 4.0, 1.0)
    assert lam.real == pytest.approx(0.4, abs=1e-15)
    assert lam.imag == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(ThresholdError):
        solve_strip_parameter(h3, 4.0, 0.75)
    lam = solve_strip_parameter(h3, 4.0, 2.0)
    assert abs(lam.real**2 - lam.imag**2 + 1 - 2.0) < 1e-12
    assert 0 < lam.imag < 0.5


@settings(max_examples=60, deadline=None)
@given(re=st.floats(0.7501, 4.0), im=st.floats(-5, 5), t0=st.floats(0.1, 3.0))
def test_threshold_consistency(h3, re, im, t0):
    c = complex(re, im)
    lam = solve_strip_parameter(h3, 4.0, c)
    assert abs(lam.real**2 - lam.imag**2 + 1 - re) < 1e-12
    assert 0 < lam.imag < strip_halfwidth(h3, 4.0) and lam.real > 0
    m = abs(symbol_eval(h3, Multiplier.heat(t0), lam))
    assert abs(abs(cmath.exp(-c * t0)) - m) < 1e-12


# --- certificate --------------------------------------------------------------------


def test_certificate_example(h3, certificate):
    c = certificate
    assert c.verdict == CHAOTIC
    assert c.u_plus.size > 0 and c.u_minus.size > 0
    assert np.any((np.abs(c.u_plus.imag) < 1e-12) & (c.u_plus.real > 0.5))
    assert np.any(c.u_minus.imag > 0.1)


def test_certificate_soundness(h3, heat1, certificate):
    hw = strip_halfwidth(h3, 4.0)
    for pts, ok in ((certificate.u_plus, lambda r: r <= 1 - MARGIN), (certificate.u_minus, lambda r: r >= 1 + MARGIN)):
        r = np.abs(symbol_eval(h3, heat1, pts)) / NU
        assert np.all(ok(r))
        assert np.all(np.abs(pts.imag) < hw)
    for root in certificate.roots:
        unit = cmath.exp(2j * math.pi * float(root.rotation))
        assert abs(complex(symbol_eval(h3, heat1, root.lam)) / NU - unit) < 1e-10
        assert abs(root.lam.imag) < hw - 1e-9


def test_rotation_zero_root(certificate):
    r0 = [r for r in certificate.roots if r.rotation == 0][0]
    assert abs(r0.lam - 0.5) < 1e-10


def test_rotation_24_matches_quadratic(certificate):
    r = [r for r in certificate.roots if r.rotation == Fraction(1, 24)][0]
    assert abs(r.lam - heat_root(1 / 24)) < 1e-9
    assert r.residual < 1e-10


@pytest.mark.xfail(strict=True, reason="literal 0.5606-0.2335i is not a root of the quadratic it is derived from")
def test_rotation_24_literal(certificate):
    r = [r for r in certificate.roots if r.rotation == Fraction(1, 24)][0]
    assert abs(r.lam - complex(0.5606, -0.2335)) < 1e-3


def test_conjugate_roots(certificate):
    by_rot = {r.rotation: r.lam for r in certificate.roots}
    for q in (24, 12):
        assert abs(by_rot[Fraction(1, q)] - by_rot[Fraction(-1, q)].conjugate()) < 1e-9


def test_rotation_third_outside_strip(h3, heat1):
    roots, missing = find_unimodular_roots(h3, heat1, NU, 0.5, [Fraction(1, 3)], 4.0)
    assert roots == [] and missing == [Fraction(1, 3)]
    assert abs(heat_root(1 / 3).imag) > 0.5


def test_scaling_invariance(h3, heat1, certificate):
    theta = 0.7
    c2 = certify_mixing(h3, heat1, NU * cmath.exp(1j * theta), 0.5, 4.0)
    assert np.array_equal(c2.u_plus, certificate.u_plus)
    assert np.array_equal(c2.u_minus, certificate.u_minus)
    for r in c2.roots:
        target = NU * cmath.exp(1j * theta) * cmath.exp(2j * math.pi * float(r.rotation))
        assert abs(complex(symbol_eval(h3, heat1, r.lam)) - target) < 1e-10 * NU


def test_certificate_errors(h3, heat1):
    with pytest.raises(NonconstancyError):
        certify_mixing(h3, Multiplier.identity(), 1.0, 0.5, 4.0)
    with pytest.raises(InputError):
        certify_mixing(h3, heat1, 0.5, 0.5, 4.0)
    with pytest.raises(DomainError):
        certify_mixing(h3, heat1, NU, 0.5 + 0.6j, 4.0)
    with pytest.raises(ThresholdError):
        certify_mixing(h3, heat1, NU, 0.5, 2.0)


def test_certificate_json(certificate, tmp_path):
    certificate.write(tmp_path / "c.json")
    import json

    obj = json.loads((tmp_path / "c.json").read_text())
    assert obj["verdict"] == CHAOTIC
    assert obj["multiplier"] == {"kind": "heat", "t": 1.0}
    assert len(obj["u_plus"]) == certificate.u_plus.size
    assert {r["rotation"] for r in obj["roots"]} >= {"0/1", "1/24"}


def test_sphere_mean_certificate(h3):
    T = Multiplier.sphere_mean(1.0)
    nu = abs(symbol_eval(h3, T, 1.0))
    c = certify_mixing(h3, T, nu, 1.0, 4.0)
    assert c.u_plus.size > 0 and c.u_minus.size > 0
    assert c.verdict in ("mixing_certified", "chaotic_certified")


# --- periodic points ----------------------------------------------------------------


def test_lcm_period():
    a = RootRecord(0.5 + 0j, Fraction(1, 24), 0.0)
    b = RootRecord(0.6 + 0j, Fraction(1, 8), 0.0)
    phi = build_periodic_point([a, b], [0.0, 1.0], [1.0, 2.0])
    assert phi.period == 24
    assert phi.product_period == 192
    with pytest.raises(InputError):
        build_periodic_point([], [], [])
    with pytest.raises(InputError):
        build_periodic_point([a], [0.0, 1.0], [1.0])


def test_diagonal_action(h3, heat1, certificate):
    roots = [r for r in certificate.roots if r.rotation in (Fraction(1, 24), Fraction(-1, 12))]
    phi = build_periodic_point(roots, [0.0, 1.0], [1.0, 0.5j])
    assert phi.period == 24
    assert diagonal_defect(h3, heat1, phi, NU) < 1e-10
    assert diagonal_defect(h3, heat1, phi, NU, q=phi.product_period) < 1e-10
    assert diagonal_defect(h3, heat1, phi, NU, q=12) > 0.1


def test_verify_fixed_point(h3, heat1, certificate):
    r0 = [r for r in certificate.roots if r.rotation == 0]
    phi = build_periodic_point(r0, [0.0], [1.0])
    assert phi.period == 1
    d = verify_periodic(h3, heat1, phi, NU)
    assert d < 1e-3
    assert verify_periodic(h3, heat1, phi.scaled(7.0), NU) == pytest.approx(d, rel=1e-6, abs=1e-14)


def test_verify_translated_root(h3, heat1, certificate):
    r = [r for r in certificate.roots if r.rotation == Fraction(1, 24)]
    phi = build_periodic_point(r, [1.0], [1.0])
    assert verify_periodic(h3, heat1, phi, NU) < 1e-2


def test_verify_detects_wrong_nu(h3, heat1, certificate):
    r0 = [r for r in certificate.roots if r.rotation == 0]
    phi = build_periodic_point(r0, [0.0], [1.0])
    assert verify_periodic(h3, heat1, phi, NU * 1.05) > 1e-2


def test_verify_custom_unsupported(h3, certificate):
    T = Multiplier.custom(lambda z: cmath.exp(-(z * z + 1)), 1.0)
    phi = build_periodic_point(certificate.roots[:1], [0.0], [1.0])
    with pytest.raises(UnsupportedModelError):
        verify_periodic(h3, T, phi, NU)


# --- orbits --------------------------------------------------------------------------


def lam_for_factor(f):
    """Real lambda with exp(-(lam^2 + 1)) / nu = f for heat(1)."""
    return math.sqrt(0.25 - math.log(f))


def test_orbit_decay(h3, heat1):
    rec = simulate_orbit(h3, heat1, NU, [(lam_for_factor(0.9), 1.0)], 20)
    assert rec.norms[20] == pytest.approx(0.9**20 * rec.norms[0], rel=1e-2)
    ratios = rec.norms[1:] / rec.norms[:-1]
    assert np.max(np.abs(np.log(ratios) - math.log(0.9))) < 1e-2


def test_orbit_unimodular(h3, heat1, certificate):
    r = [r for r in certificate.roots if r.rotation == Fraction(1, 24)][0]
    rec = simulate_orbit(h3, heat1, NU, [(r.lam, 1.0)], 50)
    assert np.max(np.abs(rec.norms / rec.norms[0] - 1)) < 1e-2


def test_orbit_mixed_slope(h3, heat1):
    init = [(lam_for_factor(0.9), 1.0), (lam_for_factor(1.1), 1.0)]
    rec = simulate_orbit(h3, heat1, NU, init, 50)
    slope = rec.log_norms[50] - rec.log_norms[49]
    assert slope == pytest.approx(math.log(1.1), rel=2e-2)


def test_orbit_measured_factors(h3, heat1):
    facs = [0.9, 1.0, 1.1]
    rec = simulate_orbit(h3, heat1, NU, [(lam_for_factor(f), 1.0) for f in facs], 50)
    assert rec.measured_factors.shape == (50, 3)
    assert np.max(np.abs(rec.measured_factors - np.array(facs))) < 1e-2
    assert np.allclose(rec.moduli, facs, atol=1e-12)


def test_orbit_overflow_and_limits(h3, heat1, tmp_path):
    rec = simulate_orbit(h3, heat1, NU / 3, [(0.5, 1.0)], 200)
    assert rec.stopped_early
    assert rec.norms[-1] > 1e12 and rec.norms.size < 201
    with pytest.raises(InputError):
        simulate_orbit(h3, heat1, NU, [(0.5, 1.0)], ORBIT_MAX_STEPS + 1)
    with pytest.raises(DomainError):
        simulate_orbit(h3, heat1, NU, [(0.5 + 0.6j, 1.0)], 5)
    rec = simulate_orbit(h3, heat1, NU, [(0.5, 1.0)], 3)
    rec.to_csv(tmp_path / "o.csv")
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "step,norm,log_norm" and len(lines) == 5


def test_orbit_on_h2():
    m = build_model("hyperbolic", 2, grid_size=1024)
    T = Multiplier.heat(1.0)
    lam = 0.5
    nu = abs(symbol_eval(m, T, lam)) / 0.95
    rec = simulate_orbit(m, T, nu, [(lam, 1.0)], 10)
    assert np.max(np.abs(rec.norms[1:] / rec.norms[:-1] - 0.95)) < 1e-2
