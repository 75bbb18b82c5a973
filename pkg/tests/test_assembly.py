import numpy as np
import pytest
import sympy as sp

from magtorus.assembly import (
    MagneticSystem,
    assemble_integral,
    complex_max_norm,
    eval_integral,
    fourier_condition_residual,
    liouville_reference_integral,
    magnetic_field,
    mixed_mode_mass,
    system_residual,
    verify_report,
)
from magtorus.deformation import (
    DEFAULT_DATA,
    LiouvilleData,
    StateU,
    ck_jet,
    evaluate_jet,
    liouville_initial_state,
)
from magtorus.errors import PositivityViolation
from magtorus.fields import (
    Field2,
    constant,
    cosine_polynomial_x,
    cosine_polynomial_y,
    field_from_modes,
    max_norm,
    shift,
)

from conftest import random_field

PTS = np.random.default_rng(0).uniform(size=(3, 200))
PTS[2] *= 2 * np.pi


@pytest.fixture(scope="module")
def small_jet():
    return ck_jet(liouville_initial_state(DEFAULT_DATA, 32), 8, 32)


def test_system_rejects_nonexact_field():
    with pytest.raises(ValueError):
        MagneticSystem(constant(1.0, 1), constant(0.5, 1))
    MagneticSystem(constant(1.0, 1), constant(0.5, 1), require_exact=False)


def test_system_rejects_nonpositive_metric():
    with pytest.raises(PositivityViolation):
        MagneticSystem(cosine_polynomial_x([0.5, 1.0]), Field2.zeros(1))


# -- magnetic field -----------------------------------------------------------

def test_liouville_state_has_no_field():
    U = liouville_initial_state(DEFAULT_DATA, 8)
    assert np.all(magnetic_field(U).coeffs == 0)


def test_first_order_field(small_jet):
    d = DEFAULT_DATA
    om1 = magnetic_field(small_jet.coeffs[1])
    x, y = PTS[0], PTS[1]
    expect = d.lam1_values(x, 2) - d.lam2_values(y, 2)
    assert np.max(np.abs(om1(x, y) - expect)) < 1e-10
    assert max_norm(om1, 64) > 1.0


def test_field_of_sine_against_symbolic_derivative():
    f = field_from_modes([(0, 1, -0.5j), (0, -1, 0.5j)], 1)
    U = StateU(constant(1.0, 1), Field2.zeros(1), f, Field2.zeros(1))
    ys = sp.Symbol("y")
    expr = sp.lambdify(ys, -sp.Rational(1, 4) * sp.diff(sp.sin(2 * sp.pi * ys), ys), "numpy")
    assert np.allclose(magnetic_field(U)(0.3, PTS[1]), expr(PTS[1]), atol=1e-13)


def test_field_is_always_exact():
    rng = np.random.default_rng(1)
    for _ in range(5):
        U = StateU(constant(2.0, 3), *(random_field(rng, 3) for _ in range(3)))
        assert abs(magnetic_field(U).mean()) < 1e-13


# -- level integral -----------------------------------------------------------

def test_initial_integral_is_four_times_liouville():
    U = liouville_initial_state(DEFAULT_DATA, 8)
    F = assemble_integral(U)
    x, y, phi = PTS
    got = eval_integral(F, x, y, phi)
    assert np.max(np.abs(got - 4 * liouville_reference_integral(DEFAULT_DATA, x, y, phi))) < 1e-12


def test_constant_state_integral():
    U = StateU(constant(3.0, 1), constant(-1.0, 1), Field2.zeros(1), Field2.zeros(1))
    phi = PTS[2]
    assert np.allclose(eval_integral(assemble_integral(U), 0.2, 0.4, phi),
                       -1.0 + 6.0 * np.cos(2 * phi), atol=1e-13)


def test_a2_is_the_metric(default_state):
    assert assemble_integral(default_state).a2 is default_state.lam


def test_eval_integral_special_angles(default_state):
    F = assemble_integral(default_state)
    x, y = 0.21, 0.67
    a0, ar, ai, a2 = F.a0(x, y), F.a1_re(x, y), F.a1_im(x, y), F.a2(x, y)
    assert eval_integral(F, x, y, 0.0) == pytest.approx(a0 + 2 * ar + 2 * a2, abs=1e-13)
    assert eval_integral(F, x, y, np.pi / 2) == pytest.approx(a0 - 2 * ai - 2 * a2, abs=1e-13)


def test_eval_integral_complex_sum(default_state):
    F = assemble_integral(default_state)
    x, y, phi = PTS
    a = {0: F.a0(x, y) + 0j, 1: F.a1_re(x, y) + 1j * F.a1_im(x, y), 2: F.a2(x, y) + 0j}
    total = sum((a[abs(k)] if k >= 0 else np.conj(a[-k])) * np.exp(1j * k * phi)
                for k in range(-2, 3))
    assert np.max(np.abs(eval_integral(F, x, y, phi) - total.real)) < 1e-13


def test_reference_integral_special_angles():
    d = DEFAULT_DATA
    assert liouville_reference_integral(d, 0.3, 0.6, 0.0) == pytest.approx(d.lam2_values(0.6))
    assert liouville_reference_integral(d, 0.3, 0.6, np.pi / 2) == pytest.approx(
        -d.lam1_values(0.3), abs=1e-15)


def test_positivity_propagates_from_sqrt():
    U = StateU(cosine_polynomial_x([0.5, 1.0]), Field2.zeros(1), Field2.zeros(1), Field2.zeros(1))
    with pytest.raises(PositivityViolation):
        assemble_integral(U)


# -- residuals ----------------------------------------------------------------

def test_liouville_state_residuals_vanish():
    U = liouville_initial_state(LiouvilleData((1.0, 0.2, 0.05), (1.3, -0.1)), 8)
    for R in system_residual(U):
        assert np.max(np.abs(R.coeffs)) == 0.0
    for pair in fourier_condition_residual(U):
        assert complex_max_norm(pair) < 1e-12


def test_constant_state_residuals_vanish():
    U = StateU(*(constant(v, 1) for v in (2.0, 1.0, 0.3, -0.2)))
    assert all(np.max(np.abs(R.coeffs)) == 0.0 for R in system_residual(U))


def test_residual_order_in_t(small_jet):
    K = 6
    jet = small_jet.truncated(K)
    ts = (0.01, 0.005, 0.0025)
    norms = np.array([[max_norm(R, 64) for R in system_residual(evaluate_jet(jet, t))] for t in ts])
    for i in (1, 2, 3):
        slope = np.polyfit(np.log(ts), np.log(norms[:, i]), 1)[0]
        assert slope >= K, (i, slope)
    assert np.all(norms[:, 0] < 1e-20)


def test_k3_condition_vanishes_for_any_state():
    rng = np.random.default_rng(3)
    U = StateU(constant(2.0, 3) + random_field(rng, 3) * 0.05,
               *(random_field(rng, 3) for _ in range(3)))
    assert complex_max_norm(fourier_condition_residual(U, 64)[3], 64) < 1e-12


def test_random_state_violates_conditions():
    rng = np.random.default_rng(4)
    U = StateU(constant(2.0, 3) + random_field(rng, 3) * 0.05,
               *(random_field(rng, 3) for _ in range(3)))
    worst = max(complex_max_norm(p, 64) for p in fourier_condition_residual(U, 64))
    assert worst > 1e-3


@pytest.mark.parametrize("K,t", [(1, 0.02), (2, 0.01), (4, 0.02), (6, 0.01)])
def test_two_formulations_agree(small_jet, K, t):
    rep = verify_report(evaluate_jet(small_jet.truncated(K), t), t, K, 64)["residual_norms"]
    R = max(rep[f"R{i}"][0] for i in range(1, 5))
    E = max(rep[f"eq8_k{k}"][0] for k in range(4))
    assert 0.1 < E / R < 10


def test_shift_equivariance(small_jet):
    U = evaluate_jet(small_jet.truncated(4), 0.02)
    Us = StateU(*(shift(c, 0.5, 0.0) for c in U.components()))
    for R, Rs in zip(system_residual(U), system_residual(Us)):
        diff = shift(R, 0.5, 0.0).truncate(Rs.band_limit)[0].pad(Rs.band_limit)
        assert np.max(np.abs(diff.coeffs - Rs.coeffs)) < 1e-12


def test_verify_report_layout(default_state):
    rep = verify_report(default_state, 0.01, 12)
    assert set(rep["residual_norms"]) == {"R1", "R2", "R3", "R4",
                                          "eq8_k0", "eq8_k1", "eq8_k2", "eq8_k3"}
    assert all(len(v) == 2 for v in rep["residual_norms"].values())
    assert abs(rep["omega_mean"]) < 1e-13
    assert rep["lam_min"] > 0


def test_mixed_mode_mass_zero_for_separated_fields():
    f = cosine_polynomial_x([1.0, 0.3, 0.1]) + cosine_polynomial_y([0.0, -0.2])
    assert mixed_mode_mass(f) == 0.0
    g = f + field_from_modes([(1, 1, 0.01)], 2, symmetrize=True)
    assert mixed_mode_mass(g) == pytest.approx(np.sqrt(2) * 0.01)
