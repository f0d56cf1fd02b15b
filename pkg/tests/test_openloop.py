import numpy as np
import pytest

from rimscatter.core import FieldBundle, field_bundle, fixed_field, gain_dbi, total_pattern
from rimscatter.openloop import (
    ConstraintSet,
    GpSettings,
    RankDeficientError,
    build_constraints,
    gp_solve,
    max_eigenvalue,
    optimal_weights_multi,
    optimal_weights_single,
    project_unit_modulus,
)

from conftest import deg


def _toy_bundle(e, ef):
    e = np.asarray(e, dtype=complex)
    return FieldBundle(psi_rad=0.0, fixed_field=complex(ef), element_vector=e)


# --- closed-form weights ------------------------------------------------------

def test_optimal_single_toy_substitution():
    b = _toy_bundle([1, 1j, -1, -1j], 2.0)
    w = optimal_weights_single(b)
    # ||e||^2 = 4, so w = -2 conj(e)/4 and e.w = -2 exactly
    assert np.array_equal(w.values, -0.5 * np.conj(b.element_vector))
    assert b.element_vector @ w.values == -2


def test_optimal_single_zero_field_gives_zero_weights():
    w = optimal_weights_single(_toy_bundle([1, 2, 3], 0.0))
    assert np.all(w.values == 0)


def test_optimal_single_rejects_zero_vector():
    with pytest.raises(ValueError):
        optimal_weights_single(_toy_bundle([0, 0], 1.0))


def test_multi_reduces_to_single(geometry):
    b = field_bundle(geometry, deg(1.6))
    w1 = optimal_weights_single(b).values
    wk = optimal_weights_multi(ConstraintSet.from_bundle(b)).values
    assert np.allclose(w1, wk, rtol=1e-10, atol=1e-14 * np.abs(w1).max())


def test_multi_three_nulls(geometry):
    angles = [deg(1.0), deg(2.0), deg(3.0)]
    cs = build_constraints(geometry, angles)
    w = optimal_weights_multi(cs)
    for psi in angles:
        total = fixed_field(geometry, psi) + field_bundle(geometry, psi).element_vector @ w.values
        assert abs(total) < 1e-10 * abs(fixed_field(geometry, psi))
    # residual certificate recomputed from scratch
    r = np.array([field_bundle(geometry, p).element_vector @ w.values + fixed_field(geometry, p) for p in angles])
    assert np.allclose(r, cs.residual(w), atol=1e-12 * np.abs(cs.targets).max())


def test_duplicate_row_is_rank_deficient(geometry):
    b = field_bundle(geometry, deg(1.5))
    cs = ConstraintSet(np.vstack([b.element_vector, b.element_vector]), [-b.fixed_field] * 2, ("a", "b"))
    with pytest.raises(RankDeficientError) as exc:
        optimal_weights_multi(cs)
    assert exc.value.rows == [1]


def test_optimal_null_costs_boresight_gain(geometry, quiescent_ones):
    w = optimal_weights_single(field_bundle(geometry, deg(1.25)))
    before = total_pattern(geometry, quiescent_ones, [0.0]).gain_dbi[0]
    after = total_pattern(geometry, w.values, [0.0]).gain_dbi[0]
    assert after - before == pytest.approx(-0.4, abs=0.2)


# --- projection ---------------------------------------------------------------

def test_projection_examples():
    out = project_unit_modulus([1 + 0j, 3j, 0, -2.5])
    assert out.tolist() == [1 + 0j, 1j, 1 + 0j, -1 + 0j]


def test_power_iteration_bounds_largest_eigenvalue():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, 40)) + 1j * rng.standard_normal((3, 40))
    exact = np.linalg.eigvalsh(a @ a.conj().T).max()
    lam = max_eigenvalue(a)
    assert exact * (1 - 1e-5) <= lam <= exact * (1 + 1e-3)


# --- gradient projection ------------------------------------------------------

def test_gp_toy_single_element():
    cs = ConstraintSet([[1.0]], [-1.0])
    # from w = 1 one step of size 0.9 lands on -0.8, which projects to -1
    r = gp_solve(cs, GpSettings(init="provided", initial=np.array([1.0 + 0j])))
    assert r.weights.values[0] == -1
    assert r.cost == 0.0
    assert r.iterations == 1
    # the least-squares phase start is already exact
    assert gp_solve(cs).iterations == 0


@pytest.mark.parametrize("psi_deg", [1.0, 1.25, 2.0, 3.0])
def test_gp_single_null_exact(geometry, psi_deg):
    psi = deg(psi_deg)
    r = gp_solve(build_constraints(geometry, [psi]))
    w = r.weights.values
    # unit modulus up to the rounding of x/|x|
    assert np.max(np.abs(np.abs(w) - 1)) <= 4 * np.finfo(float).eps
    total = fixed_field(geometry, psi) + field_bundle(geometry, psi).element_vector @ w
    assert abs(total) < 1e-10 * abs(fixed_field(geometry, psi))
    assert gain_dbi(geometry, total) < -90
    steps = np.diff(r.cost_trace)
    assert np.mean(steps <= 0) >= 0.95


@pytest.mark.parametrize("psi_deg", [1.25, 3.0])
def test_gp_mainlobe_row_monotone(geometry, psi_deg):
    r = gp_solve(build_constraints(geometry, [deg(psi_deg)], mainlobe=0.03))
    assert np.mean(np.diff(r.cost_trace) <= 0) >= 0.95
    assert np.max(np.abs(np.abs(r.weights.values) - 1)) <= 4 * np.finfo(float).eps


def test_gp_deterministic(geometry):
    cs = build_constraints(geometry, [deg(2.2)])
    a, b = gp_solve(cs), gp_solve(cs)
    assert np.array_equal(a.weights.values, b.weights.values)
    assert np.array_equal(a.cost_trace, b.cost_trace)


def test_gp_settings_validation():
    for bad in (dict(step_fraction_gamma=1.0), dict(step_fraction_gamma=0.0), dict(residual_tolerance=0), dict(init="provided")):
        with pytest.raises(ValueError):
            GpSettings(**bad)


@pytest.mark.parametrize("offset_hz", [20e6, 40e6, 80e6])
def test_gp_frequency_warm_start(geometry, offset_hz):
    psi = deg(1.75)
    prev = gp_solve(build_constraints(geometry, [psi], mainlobe=0.03)).weights
    moved = geometry.retune(geometry.config.frequency_hz + offset_hz)
    cs = build_constraints(moved, [psi], mainlobe=0.03)
    warm = gp_solve(cs, GpSettings(init="provided", initial=prev))
    cold = [gp_solve(cs, GpSettings(init="random", seed=s)) for s in range(3)]
    assert warm.converged and all(c.converged for c in cold)
    assert warm.iterations < min(c.iterations for c in cold)


# --- constraint building ------------------------------------------------------

def test_build_constraints_rows(geometry):
    cs = build_constraints(geometry, [deg(1.75)], mainlobe=0.1)
    assert cs.n_rows == 2 and cs.labels[0] == "mainlobe"
    assert cs.targets[0] == pytest.approx(0.1 * fixed_field(geometry, 0.0))


def test_build_constraints_two_frequencies(geometry):
    cs = build_constraints(geometry, [deg(1.75)], frequencies=[1.48e9, 1.52e9])
    assert cs.n_rows == 2
    lo, hi = geometry.retune(1.48e9), geometry.retune(1.52e9)
    assert np.array_equal(cs.matrix[0], field_bundle(lo, deg(1.75)).element_vector)
    assert np.array_equal(cs.matrix[1], field_bundle(hi, deg(1.75)).element_vector)
    assert not np.allclose(cs.matrix[0], cs.matrix[1])


def test_build_constraints_errors(geometry):
    with pytest.raises(ValueError):
        build_constraints(geometry, [])
    with pytest.raises(ValueError, match="main beam"):
        build_constraints(geometry, [deg(0.1)], mainlobe=0.03)
    with pytest.raises(ValueError):
        ConstraintSet(np.ones((2, 3)), [1, 2], ("mainlobe", "mainlobe"))
