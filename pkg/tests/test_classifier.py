import dataclasses

import numpy as np
import pytest

from magtorus.classifier import (
    RESIDUAL_NAMES,
    AllLevelsQuadratic,
    ExampleOneData,
    all_levels_residuals,
    bracket_from_residuals,
    classify,
    deformed_candidate,
    energy_drift_table,
    example_one_candidate,
    example_one_system,
    liouville_candidate,
    proof_consequence_checks,
)
from magtorus.deformation import DEFAULT_DATA
from magtorus.dynamics import (
    PhasePointAngle,
    PhasePointCotangent,
    cotangent_from_angle,
    hamiltonian_flow_rhs,
    integrate,
    start_lattice,
)
from magtorus.errors import ConfigError, PositivityViolation
from magtorus.fields import Field2, cosine_polynomial_x, dx, dy

EX1 = ExampleOneData((1.0, 0.2), (0.0,), (0.0, 1.0))


def direct_bracket(sys_, q, x, y, p1, p2):
    """``dF/dt`` along the flow from partial derivatives of ``F`` and the flow itself."""
    def F_x(f):
        return dx(f)(x, y)

    def F_y(f):
        return dy(f)(x, y)

    parts = [(q.a0, p1 * p1), (q.a1, 2 * p1 * p2), (q.a2, p2 * p2), (q.b0, p1), (q.b1, p2),
             (q.c0, 1.0)]
    Fx = sum(F_x(f) * m for f, m in parts)
    Fy = sum(F_y(f) * m for f, m in parts)
    Fp1 = 2 * q.a0(x, y) * p1 + 2 * q.a1(x, y) * p2 + q.b0(x, y)
    Fp2 = 2 * q.a1(x, y) * p1 + 2 * q.a2(x, y) * p2 + q.b1(x, y)
    out = []
    for i in range(len(x)):
        d = hamiltonian_flow_rhs(sys_, PhasePointCotangent(x[i], y[i], p1[i], p2[i]))
        out.append(Fx[i] * d[0] + Fy[i] * d[1] + Fp1[i] * d[2] + Fp2[i] * d[3])
    return np.array(out)


# -- Example 1 ----------------------------------------------------------------

def test_example_one_field_and_integral():
    sys_, F1 = example_one_system(ExampleOneData((1.0,), (0.0,), (0.0, 1.0)))
    y = np.linspace(0, 1, 9)
    assert np.allclose(sys_.omega(0.3, y), -2 * np.pi * np.cos(2 * np.pi * y), atol=1e-13)
    assert F1(0.1, 0.25, 0.5, 7.0) == pytest.approx(1.5)


def test_example_one_without_potential():
    sys_, F1 = example_one_system(ExampleOneData((1.0, 0.3)))
    assert np.all(sys_.omega.coeffs == 0)
    assert F1(0.4, 0.9, -0.7, 1.0) == pytest.approx(-0.7)


def test_example_one_rejects_nonpositive_metric():
    with pytest.raises(PositivityViolation):
        ExampleOneData((0.1, 0.5))


def test_linear_integral_needs_cotangent_form():
    sys_, F1 = example_one_system(EX1)
    traj = integrate(sys_, PhasePointAngle(0.0, 0.0, 0.0), 0.1)
    with pytest.raises(ConfigError):
        F1.monitor()(traj)


# -- residuals ----------------------------------------------------------------

def test_liouville_candidate_passes():
    sys_, q = liouville_candidate(DEFAULT_DATA)
    res = all_levels_residuals(sys_, q)
    assert set(res["max_norms"]) == set(RESIDUAL_NAMES)
    assert res["max"] < 1e-11


@pytest.mark.parametrize("scale", [1.0, 0.4])
def test_example_one_combination_passes(scale):
    sys_, _ = example_one_system(EX1)
    assert all_levels_residuals(sys_, example_one_candidate(EX1, scale))["max"] < 1e-10


def test_deformed_candidate_fails(default_state, default_system):
    res = all_levels_residuals(default_system, deformed_candidate(default_state))
    big = [k for k, v in res["max_norms"].items() if v > 1e-4]
    assert any(k[0] in "ac" for k in big)


def test_hamiltonian_itself_passes():
    sys_, _ = example_one_system(EX1)
    inv = example_one_candidate(EX1, 0.0)
    assert all_levels_residuals(sys_, inv)["max"] < 1e-10


def test_broken_candidate_fails():
    sys_, _ = example_one_system(EX1)
    q = example_one_candidate(EX1)
    q = dataclasses.replace(q, a1=q.a1 + cosine_polynomial_x([0.0, 0.1]))
    assert classify(sys_, q)["verdict"] == "FAIL"


@pytest.mark.parametrize("which", ["deformed", "broken"])
def test_residuals_reconstruct_the_bracket(which, default_state, default_system):
    if which == "deformed":
        sys_, q = default_system, deformed_candidate(default_state)
    else:
        sys_, _ = example_one_system(EX1)
        q0 = example_one_candidate(EX1)
        bump = cosine_polynomial_x([0.0, 0.2, 0.1])
        q = AllLevelsQuadratic(q0.a0 + bump, q0.a1 + bump * 0.5, q0.a2, q0.b0 + bump,
                               q0.b1 - bump, q0.c0 + bump)
    rng = np.random.default_rng(0)
    x, y = rng.uniform(size=(2, 25))
    p1, p2 = rng.normal(size=(2, 25))
    res = all_levels_residuals(sys_, q)
    got = bracket_from_residuals(sys_, res, x, y, p1, p2)
    ref = direct_bracket(sys_, q, x, y, p1, p2)
    assert np.max(np.abs(got - ref)) < 1e-9 * max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(ref)) > 1e-3


# -- proof consequences -------------------------------------------------------

def test_example_one_consequences():
    sys_, _ = example_one_system(EX1)
    pc = proof_consequence_checks(sys_, example_one_candidate(EX1))
    assert pc["K2"]["variance"] == 0.0 and pc["K2"]["mean"] == 0.0
    assert pc["constant"]


def test_liouville_consequences_trivial():
    sys_, q = liouville_candidate(DEFAULT_DATA)
    pc = proof_consequence_checks(sys_, q)
    assert pc["K1"]["variance"] == 0.0 and pc["K2"]["variance"] == 0.0


def test_perturbed_b0_breaks_consequences():
    sys_, _ = example_one_system(EX1)
    q = example_one_candidate(EX1)
    q = dataclasses.replace(q, b0=q.b0 + cosine_polynomial_x([0.0, 0.1]))
    assert proof_consequence_checks(sys_, q)["K1"]["variance"] > 1e-4


# -- energy levels ------------------------------------------------------------

def test_all_levels_integral_conserved_on_three_levels():
    sys_, _ = example_one_system(EX1)
    rows = energy_drift_table(sys_, example_one_candidate(EX1), T=5.0)
    assert [r["energy"] for r in rows] == [0.25, 0.5, 1.0]
    assert all(r["max_rel_drift"] < 1e-8 for r in rows)


def test_level_integral_only_on_its_level(default_state, default_system):
    rows = energy_drift_table(default_system, deformed_candidate(default_state),
                              energies=(0.25, 0.5), T=5.0)
    assert rows[0]["max_rel_drift"] > 100 * rows[1]["max_rel_drift"]


def test_deformed_candidate_equals_level_integral(default_state, default_system):
    from magtorus.assembly import assemble_integral, eval_integral
    F = assemble_integral(default_state)
    q = deformed_candidate(default_state)
    for p in start_lattice(2, 2):
        c = cotangent_from_angle(default_system, p)
        assert q.evaluate(c.x, c.y, c.p1, c.p2) == pytest.approx(
            eval_integral(F, p.x, p.y, p.phi), abs=1e-12)


def test_zero_field_candidate_monitor_type():
    sys_, q = liouville_candidate(DEFAULT_DATA)
    traj = integrate(sys_, PhasePointAngle(0.0, 0.0, 0.0), 0.1)
    with pytest.raises(ConfigError):
        q.monitor()(traj)
    assert isinstance(q.a0, Field2)
