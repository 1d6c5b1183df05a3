import json
import math

import numpy as np
import pytest

from radialchaos.convolution import (
    RadialMeasure,
    convolve_direct,
    convolve_measure,
    convolve_radial,
    measure_symbol,
    normalized_bump,
    young_bound_check,
)
from radialchaos.errors import InputError, UnsupportedModelError
from radialchaos.model import RadialFunction, build_model, lp_norm_radial
from radialchaos.transform import spherical_transform, translate_radial


def fn(model, f, label=""):
    return RadialFunction.from_callable(model, f, label)


def random_smooth(model, rng):
    """Random combination of two Gaussian bumps."""
    c = rng.normal(size=2)
    w = rng.uniform(0.4, 2.0, 2)
    m = rng.uniform(0.0, 2.0, 2)
    return fn(model, lambda r: c[0] * np.exp(-(((r - m[0]) / w[0]) ** 2)) + c[1] * np.exp(-(((r - m[1]) / w[1]) ** 2)))


def rel_l2(model, a, b):
    vw = model.volume_weights
    return math.sqrt(np.sum(vw * np.abs(a.profile - b.profile) ** 2) / np.sum(vw * np.abs(b.profile) ** 2))


def test_convolution_theorem(h3, rng):
    for _ in range(3):
        f, g = random_smooth(h3, rng), random_smooth(h3, rng)
        fg = convolve_radial(h3, f, g)
        lhs = spherical_transform(h3, fg).values
        rhs = spherical_transform(h3, f).values * spherical_transform(h3, g).values
        assert np.max(np.abs(lhs - rhs) / (1 + np.abs(rhs))) < 1e-6


def test_transform_of_product_at_one(h3):
    f = fn(h3, lambda r: np.exp(-r * r))
    g = fn(h3, lambda r: np.exp(-2 * r))
    fg = convolve_radial(h3, f, g)
    a = spherical_transform(h3, fg, [1.0]).values[0]
    b = spherical_transform(h3, f, [1.0]).values[0] * spherical_transform(h3, g, [1.0]).values[0]
    assert abs(a - b) < 1e-6


def test_commutative_and_zero(h3, rng):
    f, g = random_smooth(h3, rng), random_smooth(h3, rng)
    assert np.array_equal(convolve_radial(h3, f, g).profile, convolve_radial(h3, g, f).profile)
    zero = RadialFunction(np.zeros(len(h3.grid)), h3.grid)
    assert np.all(convolve_radial(h3, zero, g).profile == 0)


def test_associative(h3, rng):
    f, g, h = (random_smooth(h3, rng) for _ in range(3))
    left = convolve_radial(h3, convolve_radial(h3, f, g), h)
    right = convolve_radial(h3, f, convolve_radial(h3, g, h))
    assert rel_l2(h3, left, right) < 1e-6


def test_fourier_vs_direct(h3):
    f = fn(h3, lambda r: np.exp(-r * r))
    g = fn(h3, lambda r: np.exp(-2 * r))
    radii = np.linspace(0.0, 4.5, 10)
    direct = convolve_direct(h3, f, g, radii)
    fourier = convolve_radial(h3, f, g)(radii)
    assert np.max(np.abs(direct - fourier) / np.abs(fourier)) < 1e-2


def test_direct_commutes(h3):
    f = fn(h3, lambda r: np.exp(-r * r))
    g = fn(h3, lambda r: np.exp(-((r / 0.7) ** 2)))
    pts = np.linspace(0, 3, 5)
    a = convolve_direct(h3, f, g, pts)
    b = convolve_direct(h3, g, f, pts)
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-2


def test_direct_delta_limit(h3):
    f = fn(h3, lambda r: np.exp(-r * r))
    pts = np.array([0.0, 0.5, 1.0, 1.5])
    out = convolve_direct(h3, f, normalized_bump(h3, 0.05), pts)
    assert np.max(np.abs(out - np.exp(-pts**2)) / np.exp(-pts**2)) < 2e-2


def test_approximate_identity(h3):
    f = fn(h3, lambda r: np.exp(-r * r))
    errs = []
    for width in (0.4, 0.2, 0.1, 0.05):
        diff = convolve_radial(h3, f, normalized_bump(h3, width)) - f
        errs.append(lp_norm_radial(h3, diff, 2))
    assert all(b < a for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("R", [0.5, 1.0])
def test_translate_commutes_with_convolution(h3, R):
    phi = fn(h3, lambda r: np.exp(-r * r))
    psi = fn(h3, lambda r: np.exp(-((r / 0.8) ** 2)))
    pts = np.array([-0.5, 0.0, 0.5, 1.0, 2.0])
    left = convolve_direct(h3, translate_radial(h3, phi, R), psi, pts)
    right = convolve_radial(h3, phi, psi)(np.abs(pts - R))
    scale = np.max(np.abs(convolve_radial(h3, phi, psi).profile))
    assert np.max(np.abs(left - right)) / scale < 1e-2


def test_direct_unsupported_on_custom():
    m = build_model("custom_density", 3, rho=1.0, density=lambda r: 4 * np.pi * np.sinh(r) ** 2, grid_size=256)
    f = fn(m, lambda r: np.exp(-r * r))
    with pytest.raises(UnsupportedModelError):
        convolve_direct(m, f, f, [0.0])


# --- measures -------------------------------------------------------------------


def test_unit_atom_is_identity(h3):
    f = fn(h3, lambda r: np.exp(-r * r))
    out = convolve_measure(h3, f, RadialMeasure.unit_atom(0.0))
    assert np.max(np.abs(out.profile - f.profile)) < 1e-8


def test_sphere_mean_symbol(h3):
    mu = RadialMeasure.unit_atom(1.0)
    val = measure_symbol(h3, mu, [1.0])[0]
    assert val == pytest.approx(math.sin(1) / math.sinh(1), abs=1e-10)
    assert val == pytest.approx(0.716023, abs=1e-6)
    # the same on the cached spectral grid
    grid_vals = measure_symbol(h3, mu)
    lam = h3.spectral.nodes
    ref = np.where(lam > 0, np.sin(lam) / np.where(lam > 0, lam, 1) / math.sinh(1), 1 / math.sinh(1))
    assert np.max(np.abs(grid_vals - ref)) < 1e-9


def test_sphere_mean_against_annulus(h3):
    """Spatial oracle: phi_1 convolved with a thin normalised annulus at radius 1, seen from o."""
    phi = fn(h3, lambda r: np.sin(r) / np.sinh(r))
    width = 0.02
    raw = fn(h3, lambda r: np.exp(-(((r - 1.0) / width) ** 2)))
    annulus = raw * (1.0 / np.sum(h3.volume_weights * raw.profile))
    val = convolve_direct(h3, phi, annulus, [0.0])[0]
    assert val == pytest.approx(0.716023, abs=2e-3)


def test_density_measure_matches_radial(h3):
    f = fn(h3, lambda r: np.exp(-r * r))
    g = fn(h3, lambda r: np.exp(-2 * r))
    a = convolve_measure(h3, f, RadialMeasure(g, []))
    b = convolve_radial(h3, f, g)
    assert np.max(np.abs(a.profile - b.profile)) < 1e-8


def test_atom_radius_bound(h3):
    f = fn(h3, lambda r: np.exp(-r * r))
    with pytest.raises(InputError):
        convolve_measure(h3, f, RadialMeasure.unit_atom(h3.r_max / 2))
    with pytest.raises(InputError):
        RadialMeasure(None, [(-1.0, 1.0)])


def test_total_variation(h3):
    g = fn(h3, lambda r: -np.exp(-2 * r))
    mu = RadialMeasure(g, [(0.0, 0.5), (1.0, -0.25j)])
    tv = mu.total_variation(h3)
    assert tv == pytest.approx(0.75 + lp_norm_radial(h3, g, 1), rel=1e-14)
    assert tv >= abs(0.5 - 0.25j)
    mu.atoms.append((2.0, 1.0))
    assert mu.total_variation(h3) == pytest.approx(tv + 1.0)


def test_measure_json_roundtrip(h3, tmp_path):
    g = fn(h3, lambda r: np.exp(-2 * r))
    g.to_csv(tmp_path / "g.csv")
    mu = RadialMeasure(g, [(0.5, 1 - 2j)])
    (tmp_path / "mu.json").write_text(json.dumps(mu.to_json("g.csv")))
    back = RadialMeasure.from_json(h3, tmp_path / "mu.json", base_dir=tmp_path)
    assert back.atoms == [(0.5, 1 - 2j)]
    assert np.array_equal(back.density_part.profile, g.profile)
    with pytest.raises(InputError):
        RadialMeasure.from_json(h3, {"atoms": [{"mass_re": 1}]})


# --- Young ------------------------------------------------------------------------


def test_young_random_pairs(h3, rng):
    for _ in range(100):
        f, g = random_smooth(h3, rng), random_smooth(h3, rng)
        rep = young_bound_check(h3, f, g, 4)
        assert rep.passed, rep


def test_young_zero_and_bump(h3):
    zero = RadialFunction(np.zeros(len(h3.grid)), h3.grid)
    g = normalized_bump(h3, 0.5)
    rep = young_bound_check(h3, zero, g, 2)
    assert rep.passed and rep.lhs == 0
    f = fn(h3, lambda r: np.exp(-r * r))
    rep = young_bound_check(h3, f, g, 2)
    assert 0 < rep.ratio <= 1
