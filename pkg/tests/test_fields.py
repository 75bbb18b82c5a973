import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magtorus.errors import ConfigError, PositivityViolation
from magtorus.fields import (
    TWO_PI,
    Field2,
    GridSampling,
    constant,
    cosine_polynomial_x,
    dx,
    dy,
    evaluate,
    field_from_modes,
    linear_combine,
    max_norm,
    mean,
    mul,
    read_grid_csv,
    read_spectrum_json,
    shift,
    sqrt_field,
    write_grid_csv,
    write_spectrum_json,
)

from conftest import random_field

COS_X = field_from_modes([(1, 0, 0.5), (-1, 0, 0.5)], 1)
SIN_Y = field_from_modes([(0, 1, -0.5j), (0, -1, 0.5j)], 1)


def convolve_oracle(a, b):
    """Brute-force O(N^4) coefficient convolution."""
    Na, Nb = a.band_limit, b.band_limit
    Np = Na + Nb
    out = np.zeros((2 * Np + 1,) * 2, dtype=complex)
    for m1 in range(-Na, Na + 1):
        for n1 in range(-Na, Na + 1):
            ca = a.coeffs[m1 + Na, n1 + Na]
            for m2 in range(-Nb, Nb + 1):
                for n2 in range(-Nb, Nb + 1):
                    out[m1 + m2 + Np, n1 + n2 + Np] += ca * b.coeffs[m2 + Nb, n2 + Nb]
    return out


# -- construction and evaluation ----------------------------------------------

def test_constant_from_modes():
    f = field_from_modes([(0, 0, 2.0)], 3)
    assert f(0.3, 0.9) == pytest.approx(2.0, abs=1e-15)
    assert mean(f) == 2.0


def test_cos_and_sin_from_modes():
    xs = np.linspace(0, 1, 7)
    assert np.allclose(COS_X(xs, 0.2), np.cos(TWO_PI * xs), atol=1e-15)
    assert np.allclose(SIN_Y(0.4, xs), np.sin(TWO_PI * xs), atol=1e-15)


def test_out_of_band_mode_rejected():
    with pytest.raises(ConfigError):
        field_from_modes([(3, 0, 1.0)], 2)


def test_non_hermitian_rejected_unless_symmetrized():
    with pytest.raises(ConfigError):
        field_from_modes([(1, 0, 1.0)], 1)
    f = field_from_modes([(1, 0, 0.5)], 1, symmetrize=True)
    assert f(0.0, 0.0) == pytest.approx(1.0)


def test_eval_examples():
    assert abs(COS_X(0.25, 0.77)) < 1e-15
    assert constant(5.0, 2)(0.123, 0.456) == pytest.approx(5.0, abs=1e-14)


def test_eval_product_matches_direct_trig():
    g = random_field(np.random.default_rng(1), 4)
    x, y = 0.1, 0.7
    direct = sum(g.coefficient(m, n) * np.exp(2j * np.pi * (m * x + n * y))
                 for m in range(-4, 5) for n in range(-4, 5)).real
    assert (COS_X * g)(x, y) == pytest.approx(np.cos(TWO_PI * x) * direct, abs=1e-13)


def test_periodicity():
    f = random_field(np.random.default_rng(2), 5)
    x, y = np.random.default_rng(3).uniform(size=(2, 20))
    assert np.allclose(f(x + 1.0, y), f(x, y), atol=1e-13)
    assert np.allclose(f(x, y - 3.0), f(x, y), atol=1e-13)


def test_immutable():
    f = random_field(np.random.default_rng(4), 2)
    with pytest.raises(ValueError):
        f.coeffs[0, 0] = 1.0


# -- derivatives --------------------------------------------------------------

def test_dx_cos():
    xs = np.linspace(0, 1, 9)
    assert np.allclose(dx(COS_X)(xs, 0.0), -TWO_PI * np.sin(TWO_PI * xs), atol=1e-13)


def test_dy_constant():
    assert np.all(dy(constant(3.0, 2)).coeffs == 0)


def test_mixed_derivatives_commute():
    f = random_field(np.random.default_rng(5), 6)
    d = dx(dy(f)).coeffs
    assert np.max(np.abs(d - dy(dx(f)).coeffs)) < 1e-14 * np.max(np.abs(d))


def test_dx_against_finite_differences_second_order():
    f = random_field(np.random.default_rng(6), 3)
    x, y = 0.31, 0.62
    exact = dx(f)(x, y)
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        fd = (f(x + h, y) - f(x - h, y)) / (2 * h)
        errs.append(abs(fd - exact))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(3.5 < r < 4.5 for r in ratios)


# -- products and combinations ------------------------------------------------

def test_cos_squared():
    p = mul(COS_X, COS_X)
    expect = field_from_modes([(0, 0, 0.5), (2, 0, 0.25), (-2, 0, 0.25)], 2)
    assert np.max(np.abs(p.coeffs - expect.coeffs)) < 1e-15


def test_mul_identity():
    f = random_field(np.random.default_rng(7), 4)
    p = mul(f, constant(1.0, 0))
    assert np.max(np.abs(p.coeffs - f.coeffs)) < 1e-15


def test_mul_matches_convolution_oracle_cos_sin():
    p = mul(COS_X, SIN_Y)
    assert np.max(np.abs(p.coeffs - convolve_oracle(COS_X, SIN_Y))) < 1e-14


@pytest.mark.parametrize("Na,Nb", [(1, 1), (3, 5), (8, 8), (0, 6)])
def test_mul_matches_convolution_oracle_random(Na, Nb):
    rng = np.random.default_rng(Na * 10 + Nb)
    a, b = random_field(rng, Na), random_field(rng, Nb)
    oracle = convolve_oracle(a, b)
    assert np.max(np.abs(mul(a, b).coeffs - oracle)) < 1e-14 * max(1.0, np.max(np.abs(oracle)))


def test_mul_truncation_reports_mass():
    p, lost = mul(COS_X, COS_X, band_limit=1, report=True)
    assert p.band_limit == 1
    assert lost == pytest.approx(2 * 0.25 ** 2)


def test_linear_combine_examples():
    f = random_field(np.random.default_rng(8), 3)
    assert np.all(linear_combine([(1, f), (-1, f)]).coeffs == 0)
    assert linear_combine([(2.0, COS_X)])(0.0, 0.0) == pytest.approx(2.0)


def test_linear_combine_associative():
    rng = np.random.default_rng(9)
    a, b, c = (random_field(rng, n) for n in (2, 4, 3))
    lhs = linear_combine([(0.3, a), (-1.2, b), (2.5, c)])
    rhs = (a * 0.3 + b * -1.2) + c * 2.5
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-14


# -- square root --------------------------------------------------------------

def test_sqrt_constant():
    r = sqrt_field(constant(4.0, 1), 16)
    assert r(0.3, 0.2) == pytest.approx(2.0, abs=1e-14)


def test_sqrt_zero_raises_with_location():
    with pytest.raises(PositivityViolation) as info:
        sqrt_field(constant(0.0, 1), 16)
    assert info.value.point is not None
    assert info.value.value == 0.0


def test_sqrt_negative_somewhere_reports_point():
    f = cosine_polynomial_x([0.5, 1.0])
    with pytest.raises(PositivityViolation) as info:
        sqrt_field(f, 64)
    x, _ = info.value.point
    assert abs(x - 0.5) < 1 / 64 + 1e-12
    assert info.value.value == pytest.approx(-0.5, abs=1e-12)


def test_sqrt_squares_back():
    f = cosine_polynomial_x([2.0, 1.0])
    _, resid = sqrt_field(f, 64, return_residual=True)
    assert resid < 1e-10


# -- norms --------------------------------------------------------------------

def test_mean_examples():
    assert mean(COS_X) == 0.0
    assert mean(constant(3.0)) == 3.0


def test_max_norm_example():
    assert max_norm(COS_X + 2.0, 64) == pytest.approx(3.0, abs=1e-12)


def test_grid_sampling_headroom():
    f = random_field(np.random.default_rng(10), 8)
    assert GridSampling.sample(f, 24).values.shape == (24, 24)
    with pytest.raises(ConfigError):
        GridSampling.sample(f, 23)


# -- properties ---------------------------------------------------------------

fields_st = st.builds(
    lambda seed, N: random_field(np.random.default_rng(seed), N),
    st.integers(0, 2 ** 32 - 1),
    st.integers(0, 6),
)


@given(fields_st, fields_st)
def test_leibniz(a, b):
    lhs = dx(mul(a, b))
    rhs = linear_combine([(1, mul(dx(a), b)), (1, mul(a, dx(b)))])
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12 * max(1.0, np.max(np.abs(lhs.coeffs)))


@given(fields_st, fields_st, st.floats(-3, 3))
def test_hermitian_symmetry_preserved(a, b, s):
    for f in (mul(a, b), dx(a), dy(b), linear_combine([(s, a), (1.0, b)]), a - b,
              shift(a, 0.3, -0.7)):
        assert f.hermitian_asymmetry() < 1e-13 * max(1.0, np.max(np.abs(f.coeffs)))


@given(fields_st, st.floats(0, 1), st.floats(0, 1))
def test_shift_evaluates_translate(a, sx, sy):
    pts = np.array([0.1, 0.55, 0.9])
    assert np.allclose(shift(a, sx, sy)(pts, pts[::-1]), a(pts + sx, pts[::-1] + sy), atol=1e-12)


# -- export -------------------------------------------------------------------

def test_grid_csv_roundtrip_and_format(tmp_path):
    f = random_field(np.random.default_rng(11), 3)
    path = tmp_path / "g.csv"
    write_grid_csv(path, f, 8)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 65
    assert lines[2].startswith("0,0.125,")
    assert np.array_equal(read_grid_csv(path), f.to_grid(8))


def test_spectrum_json_roundtrip(tmp_path):
    f = random_field(np.random.default_rng(12), 4)
    path = tmp_path / "s.json"
    write_spectrum_json(path, f)
    items = json.loads(path.read_text())
    assert set(items[0]) == {"m", "n", "re", "im"}
    g = read_spectrum_json(path, 4)
    assert np.array_equal(g.coeffs, f.coeffs)


def test_truncate_and_effective_band():
    f = random_field(np.random.default_rng(13), 5)
    g, lost = f.truncate(2)
    expect = sum(abs(f.coefficient(m, n)) ** 2 for m in range(-5, 6) for n in range(-5, 6)
                 if max(abs(m), abs(n)) > 2)
    assert lost == pytest.approx(expect, rel=1e-12)
    assert g.pad(7).effective_band() == 2
    assert isinstance(g.trimmed(), Field2)


def test_evaluate_broadcasts():
    f = random_field(np.random.default_rng(14), 2)
    X, Y = np.meshgrid(np.linspace(0, 1, 3), np.linspace(0, 1, 4), indexing="ij")
    assert evaluate(f, X, Y).shape == (3, 4)
