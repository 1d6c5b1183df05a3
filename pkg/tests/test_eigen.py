import math

import mpmath
import numpy as np
import pytest
from scipy.special import gamma

from radialchaos.eigen import (
    C_MIN_LAMBDA,
    c_function,
    c_function_table,
    calibrate_inversion,
    eigenfunction_at,
    fit_c_constants,
    plancherel_weight,
    radial_eigenfunction,
    solve_radial_ode,
)
from radialchaos.errors import NumericalError, StateError
from radialchaos.model import build_model


def phi_h3(lam, r):
    lam = complex(lam)
    r = np.asarray(r, float)
    if lam == 0:
        return r / np.sinh(r)
    return np.sin(lam * r) / (lam * np.sinh(r))


def phi_h2(lam, r):
    """Conical (Mehler) function P_{-1/2 + i lam}(cosh r)."""
    return complex(mpmath.legenp(-0.5 + 1j * lam, 0, mpmath.cosh(r), type=3))


def c_h2(lam):
    return gamma(1j * lam) / (math.sqrt(math.pi) * gamma(0.5 + 1j * lam))


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 1 + 0.4j, 0.0, 50.0, 0.7j])
def test_h3_closed_form(h3, lam):
    r = np.linspace(0.01, 10, 400)
    num = eigenfunction_at(h3, lam, r)
    ref = phi_h3(lam, r)
    assert np.max(np.abs(num - ref) / np.abs(ref).max()) < 1e-7


def test_h3_examples(h3):
    assert eigenfunction_at(h3, 1.0, [1.0])[0] == pytest.approx(math.sin(1) / math.sinh(1), abs=1e-10)
    assert math.sin(1) / math.sinh(1) == pytest.approx(0.716023, abs=1e-6)
    assert eigenfunction_at(h3, 0.0, [1.0])[0] == pytest.approx(0.850918, abs=1e-6)


@pytest.mark.parametrize("lam", [0.3, 1.0, 2.5, 0.8 + 0.3j])
def test_h2_against_conical_functions(h2, lam):
    r = np.array([0.05, 0.5, 1.0, 3.0, 6.0])
    num = eigenfunction_at(h2, lam, r)
    ref = np.array([phi_h2(lam, x) for x in r])
    assert np.max(np.abs(num - ref)) < 1e-8


def test_value_at_center_and_realness(h3, h2):
    for model in (h3, h2):
        for lam in (0.0, 3.0, 0.5j, 2 + 0.3j, 40.0):
            ef = radial_eigenfunction(model, lam)
            assert abs(ef(np.array([0.0]))[0] - 1) < 1e-10
            r0 = ef.grid.nodes[0]
            k = lam**2 + model.rho**2
            assert abs(ef.values[0] - (1 - k * r0**2 / (2 * model.dimension))) < 1e-8
            if complex(lam).real == 0 or complex(lam).imag == 0:
                assert np.max(np.abs(np.imag(ef.values))) < 1e-9


def test_even_in_lambda(h2):
    r = np.linspace(0.0, 20, 50)
    for lam in (0.7, 1.3 + 0.2j):
        a = eigenfunction_at(h2, lam, r)
        b = eigenfunction_at(h2, -lam, r)
        assert np.max(np.abs(a - b)) < 1e-9


@pytest.mark.parametrize("lam", [0.0, 1.0, 10.0, 50.0, 2 + 0.45j, 30 - 0.49j])
def test_ode_residual(h2, lam):
    ef = radial_eigenfunction(h2, lam)
    assert ef.ode_residual < 1e-7 * (1 + abs(lam) ** 2)


def test_boundedness_on_strip(h3, h2, rng):
    for model in (h3, h2):
        re = rng.uniform(0, 20, 25)
        im = rng.uniform(-model.rho, model.rho, 25)
        lams = re + 1j * im
        u, _ = solve_radial_ode(model, lams, model.grid.nodes)
        assert np.max(np.abs(u)) <= 1 + 1e-8


def test_cauchy_integral_in_lambda(h3):
    """phi_lambda(r) is entire in lambda: the circle mean reproduces the centre value."""
    lam0 = 0.8 + 0.2j
    r = np.array([0.3, 1.0])
    for points, radius in ((4, 0.1), (16, 0.5)):
        ring = lam0 + radius * np.exp(2j * np.pi * np.arange(points) / points)
        u, _ = solve_radial_ode(h3, np.concatenate([[lam0], ring]), r)
        assert np.max(np.abs(u[1:].mean(axis=0) - u[0])) < 1e-6
    # at larger r the 4-point rule needs more nodes; 16 points reach the tolerance
    r = np.array([5.0, 10.0])
    ring = lam0 + 0.1 * np.exp(2j * np.pi * np.arange(16) / 16)
    u, _ = solve_radial_ode(h3, np.concatenate([[lam0], ring]), r)
    assert np.max(np.abs(u[1:].mean(axis=0) - u[0])) < 1e-6


# --- c-function ---------------------------------------------------------------


def test_c_function_h3(h3):
    for lam in (0.5, 1.0, 2.0, 7.5):
        s = c_function(h3, lam)
        assert abs(s.c_value - 1 / (1j * lam)) < 1e-8
        assert s.fit_residual < 1e-5
    ratio = abs(c_function(h3, 1.0).c_value) ** 2 / abs(c_function(h3, 2.0).c_value) ** 2
    assert ratio == pytest.approx(4.0, rel=1e-3)
    a, b = c_function(h3, 1.7), c_function(h3, -1.7)
    assert abs(b.c_value - np.conj(a.c_value)) < 1e-8


def test_c_function_h2(h2):
    for lam in (0.3, 1.0, 4.0):
        s = c_function(h2, lam)
        assert s.fit_residual < 1e-5
        assert abs(s.c_value - c_h2(lam)) / abs(c_h2(lam)) < 1e-6


def test_c_function_fit_residual_range(h3):
    samples = c_function_table(h3, np.linspace(0.2, 50, 60))
    assert max(s.fit_residual for s in samples) < 1e-5


def test_c_function_small_lambda_error(h3):
    with pytest.raises(NumericalError):
        c_function(h3, C_MIN_LAMBDA / 2)


def test_c_estimates(h3, h2):
    for model in (h3, h2):
        C = fit_c_constants(model, np.concatenate([np.linspace(0.1, 1, 10), np.linspace(1, 50, 50)]))
        assert C < 10
        lam = np.linspace(5, 50, 40)
        inv = np.array([1 / abs(s.c_value) for s in c_function_table(model, lam)])
        env = np.log(inv) - (model.dimension - 1) / 2 * np.log(lam)
        assert np.ptp(env) < math.log(10)


# --- Plancherel weight and calibration -----------------------------------------


def test_plancherel_weight_h3(h3):
    w = plancherel_weight(h3, np.array([1.0, 2.0, 4.0]))
    kprime = w / np.array([1.0, 4.0, 16.0])
    assert np.ptp(kprime) / kprime.mean() < 1e-3
    assert plancherel_weight(h3, -2.0) == pytest.approx(plancherel_weight(h3, 2.0), rel=1e-12)


def test_kappa_h3_classical_value(h3):
    assert h3.kappa == pytest.approx(1 / (2 * math.pi**2), rel=1e-6)
    assert h3._cache["calibration_defect"] < 1e-6


def test_kappa_with_exact_weight(h3):
    kappa = calibrate_inversion(h3, weight_fn=lambda lam: lam**2 / (2 * math.pi**2))
    assert kappa == pytest.approx(1.0, abs=1e-2)


def test_uncalibrated_state_error(h3_raw):
    with pytest.raises(StateError):
        plancherel_weight(h3_raw, 1.0)


def test_kappa_stable_and_scale_free():
    model = build_model("hyperbolic", 3, grid_size=1024, spectral_nodes=1024)
    ks = [calibrate_inversion(model, width=w) for w in (0.5, 1.0, 2.0)]
    assert np.ptp(ks) / np.mean(ks) < 1e-3
    # the reference bump amplitude cancels in the least-squares ratio
    assert calibrate_inversion(model, width=1.0) == ks[1]
