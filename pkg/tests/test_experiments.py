"""Parameter sweeps: report invariants, frozen metrics, and verdict logic."""

import dataclasses
from math import pi

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscsquare.experiments import (
    IC_CONSTANTS,
    StudyReport,
    attractor_semidistance_study,
    boundary_average_study,
    default_initial_conditions,
    eigenvalue_convergence_study,
    equilibria_branch_study,
    evolution_study,
    resolvent_convergence_study,
    strictly_decreasing,
    wrong_limit_study,
)
from oscsquare.mesh import QuadratureRule, build_mesh
from oscsquare.semiflow import default_problem_spec, trivial_problem_spec

PI_SQ = np.pi**2


def _trivial16():
    return dataclasses.replace(trivial_problem_spec(), nx=16, ny=16)


# ---------------------------------------------------------------------------
# StudyReport invariants
# ---------------------------------------------------------------------------


def _report(**overrides):
    base = dict(
        study="demo",
        epsilons=(0.2, 0.1),
        metrics=({"err": 1.0}, {"err": 0.5}),
        verdicts={"err_decreasing": True},
    )
    base.update(overrides)
    return StudyReport(**base)


def test_report_exposes_series_names_and_summary():
    rep = _report()
    assert rep.metric_names == ("err",)
    assert rep.series("err") == (1.0, 0.5)
    assert rep.passed
    assert rep.summary_line() == "study=demo grid=2 pass=True"


def test_report_summary_lists_failed_verdicts_sorted():
    rep = _report(verdicts={"b_prop": False, "a_prop": False, "c_prop": True})
    assert not rep.passed
    assert rep.summary_line() == "study=demo grid=2 pass=False failed=a_prop,b_prop"


def test_report_rejects_nondecreasing_grid():
    with pytest.raises(ValueError, match="strictly decreasing"):
        _report(epsilons=(0.1, 0.1))


def test_report_rejects_misaligned_rows():
    with pytest.raises(ValueError, match="metric rows"):
        _report(metrics=({"err": 1.0},))


def test_report_rejects_mismatched_metric_keys():
    with pytest.raises(ValueError, match="differ"):
        _report(metrics=({"err": 1.0}, {"other": 0.5}))


def test_report_rejects_nonfinite_metric():
    with pytest.raises(ValueError, match="not finite"):
        _report(metrics=({"err": 1.0}, {"err": np.nan}))


def test_strictly_decreasing_basic_and_floor():
    assert strictly_decreasing([3.0, 2.0, 1.0])
    assert not strictly_decreasing([3.0, 3.0, 1.0])
    assert not strictly_decreasing([1.0, 2.0])
    # entirely sub-floor sequences pass regardless of ordering
    assert strictly_decreasing([1e-13, 5e-13, 2e-13], floor=1e-12)
    assert not strictly_decreasing([1e-13, 5e-12, 2e-13], floor=1e-12)


@given(st.lists(st.floats(min_value=1e-6, max_value=1e6), min_size=2,
                max_size=8, unique=True))
@settings(max_examples=25, deadline=None)
def test_strictly_decreasing_matches_sorted_order(values):
    descending = sorted(values, reverse=True)
    assert strictly_decreasing(descending)
    assert not strictly_decreasing(descending[::-1])


# ---------------------------------------------------------------------------
# Initial-condition protocol
# ---------------------------------------------------------------------------


def test_default_initial_conditions_cross_constants_with_modes():
    mesh = build_mesh(8, 8)
    ics = default_initial_conditions(mesh)
    assert len(ics) == 12
    assert all(u.shape == (mesh.n_nodes,) for u in ics)
    # three constant levels, four modes each, in constant-major order
    for i, u in enumerate(ics):
        level = IC_CONSTANTS[i // 4]
        assert abs(float(np.mean(u)) - level) < 0.25
        assert float(np.mean(u)) != 0.0


# ---------------------------------------------------------------------------
# Resolvent convergence
# ---------------------------------------------------------------------------


def test_resolvent_study_frozen_errors_and_anchor():
    rep = resolvent_convergence_study(_trivial16())
    assert rep.epsilons == (0.2, 0.1, 0.05)
    np.testing.assert_allclose(
        rep.series("err_l2"),
        (0.020851861170446288, 0.012108461733424301, 0.0011394563786990013),
        rtol=1e-8)
    np.testing.assert_allclose(
        rep.series("err_h1"),
        (0.051244159761812326, 0.017933651659512252, 0.0038815282078191703),
        rtol=1e-8)
    assert rep.passed, rep.summary_line()
    # constant data: the flat solve reproduces f/(a - lambda) to solver noise
    assert rep.metadata["constant_reference_expected"] == pytest.approx(2.0 / 3.0)
    assert rep.metadata["constant_reference_error"] < 1e-10


def test_resolvent_study_rejects_spectrum_side_lambda():
    with pytest.raises(ValueError, match="left of the spectrum"):
        resolvent_convergence_study(_trivial16(), lam=0.25)


def test_resolvent_anchor_survives_mesh_doubling():
    spec32 = dataclasses.replace(trivial_problem_spec(), nx=32, ny=32)
    rep = resolvent_convergence_study(spec32, eps_grid=(0.2,))
    assert rep.metadata["constant_reference_error"] < 1e-10


# ---------------------------------------------------------------------------
# Eigenvalue convergence
# ---------------------------------------------------------------------------


def test_eigenvalue_study_reference_spectrum_and_verdicts():
    rep = eigenvalue_convergence_study(_trivial16())
    ref = rep.metadata["reference_eigenvalues"]
    # flat-square pencil: a, a + pi^2 (twice), a + 2 pi^2, up to mesh error
    assert ref[0] == pytest.approx(0.5, abs=1e-10)
    assert ref[1] == pytest.approx(0.5 + PI_SQ, rel=0.06)
    assert ref[2] == pytest.approx(ref[1], abs=1e-10)
    assert ref[3] == pytest.approx(0.5 + 2 * PI_SQ, rel=0.06)
    assert rep.passed, rep.summary_line()
    np.testing.assert_allclose(rep.series("lambda_1"), 0.5, rtol=1e-10)
    assert max(rep.series("dev_1")) < 1e-10


def test_eigenvalue_study_frozen_pair_deviations():
    rep = eigenvalue_convergence_study(_trivial16())
    pair_dev = [max(r1, r2) for r1, r2 in zip(rep.series("dev_2"), rep.series("dev_3"))]
    np.testing.assert_allclose(
        pair_dev,
        (2.0262742215419429, 1.2062816760734663, 0.25589394077306515),
        rtol=1e-6)


def test_eigenvalue_study_bounds_subspace_size():
    with pytest.raises(ValueError, match="lie in"):
        eigenvalue_convergence_study(_trivial16(), k=0)
    with pytest.raises(ValueError, match="lie in"):
        eigenvalue_convergence_study(_trivial16(), k=7)


# ---------------------------------------------------------------------------
# Wrong-versus-right limit forms
# ---------------------------------------------------------------------------


def test_wrong_limit_default_grid_fixes_the_oscillation_phase():
    mesh = build_mesh(16, 16)
    rep = wrong_limit_study(mesh, QuadratureRule(2))
    expected = tuple(1.0 / (2.0 * pi * m + 0.5 * pi) for m in (4, 8, 16, 32))
    np.testing.assert_allclose(rep.epsilons, expected, rtol=1e-15)


def test_wrong_limit_study_frozen_gaps():
    mesh = build_mesh(16, 16)
    rep = wrong_limit_study(mesh, QuadratureRule(2))
    assert rep.passed, rep.summary_line()
    np.testing.assert_allclose(
        rep.series("gap_wrong_x2_x2"),
        (0.33235761429203792, 0.33307475590675129,
         0.33326670925577173, 0.33331641966161829),
        rtol=1e-8)
    np.testing.assert_allclose(
        rep.series("gap_right_x2_x2"),
        (0.00097571904130266951, 0.0002585774265893015,
         6.6624077568855355e-05, 1.6913671722296186e-05),
        rtol=1e-6)
    np.testing.assert_allclose(
        rep.series("gap_wrong_x1_x1"),
        (0.035712035837808687, 0.01882864725709088,
         0.0096745538816686016, 0.0049046339992251387),
        rtol=1e-6)
    # the naive form misses the anomalous term by one third of the probe mass
    assert all(0.30 <= g <= 0.37 for g in rep.series("gap_wrong_x2_x2"))


def test_wrong_limit_gaps_do_not_move_under_mesh_refinement():
    # both probes are bilinear, so the forms integrate them exactly on any mesh
    coarse = wrong_limit_study(build_mesh(8, 8), QuadratureRule(2),
                               eps_grid=(0.05,))
    fine = wrong_limit_study(build_mesh(16, 16), QuadratureRule(2),
                             eps_grid=(0.05,))
    np.testing.assert_allclose(coarse.series("gap_wrong_x2_x2"),
                               fine.series("gap_wrong_x2_x2"), rtol=1e-9)


# ---------------------------------------------------------------------------
# Boundary averaging
# ---------------------------------------------------------------------------


def test_boundary_study_frozen_errors_and_slopes():
    rep = boundary_average_study()
    expected_grid = tuple(1.0 / (pi * m + 0.25 * pi) for m in (2, 4, 8, 16, 32))
    np.testing.assert_allclose(rep.epsilons, expected_grid, rtol=1e-15)
    assert rep.passed, rep.summary_line()
    np.testing.assert_allclose(
        rep.series("err_const"),
        (0.014578036439885977, 0.0077177829232417672, 0.0039758296499605716,
         0.002018499165666654, 0.0010170742667254817),
        rtol=1e-8)
    assert rep.metadata["slope_const"] == pytest.approx(1.0, abs=1e-5)
    assert rep.metadata["slope_linear"] == pytest.approx(1.0, abs=0.05)
    assert rep.metadata["slope_quadratic"] == pytest.approx(1.0, abs=0.01)
    assert rep.metadata["mean_weight"] == pytest.approx(1.2160067234249796,
                                                        abs=1e-12)


def test_boundary_study_whole_period_average_is_exact():
    rep = boundary_average_study()
    assert rep.metadata["whole_period_epsilon"] == pytest.approx(1.0 / (20.0 * pi))
    assert rep.metadata["whole_period_error"] < 1e-12
    assert rep.verdicts["whole_period_exactness"]


def test_boundary_study_accepts_custom_probe():
    rep = boundary_average_study(v=np.exp)
    assert rep.metric_names == ("err_custom", "panels")
    assert rep.verdicts["slope_near_one_custom"]
    assert rep.metadata["slope_custom"] == pytest.approx(1.0, abs=0.05)
    assert "whole_period_exactness" not in rep.verdicts


# ---------------------------------------------------------------------------
# Seeded evolution
# ---------------------------------------------------------------------------


def test_evolution_study_descends_energy_on_every_leg():
    rep = evolution_study(_trivial16(), seed=7)
    assert rep.passed, rep.summary_line()
    assert rep.series("lyapunov_violations") == (0.0, 0.0, 0.0)
    np.testing.assert_allclose(
        rep.series("final_energy"),
        (0.0050437983873538915, 0.0036245723962914258, 0.0037687438834091355),
        rtol=1e-8)
    assert rep.metadata["ic_constant"] == pytest.approx(0.20015274656746707)


def test_evolution_study_is_seed_deterministic():
    one = evolution_study(_trivial16(), seed=7)
    two = evolution_study(_trivial16(), seed=7)
    assert one.metrics == two.metrics
    assert one.metadata["ic_mode_weights"] == two.metadata["ic_mode_weights"]
    other = evolution_study(_trivial16(), seed=8)
    assert other.metadata["ic_constant"] != one.metadata["ic_constant"]


# ---------------------------------------------------------------------------
# Equilibrium branches
# ---------------------------------------------------------------------------


def test_equilibria_branch_study_tracks_three_hyperbolic_branches():
    spec = dataclasses.replace(default_problem_spec(), nx=16, ny=16)
    rep = equilibria_branch_study(spec, eps_grid=(0.2, 0.1))
    assert rep.passed, rep.summary_line()
    assert rep.metadata["branch_count"] == 3
    # odd reaction terms pair the outer branches by sign symmetry
    means = rep.metadata["branch_means"]
    assert means[0] == pytest.approx(-means[2], abs=1e-9)
    assert abs(means[1]) < 1e-9
    assert rep.series("branch0_morse_index") == (0.0, 0.0)
    assert rep.series("branch1_morse_index") == (1.0, 1.0)
    np.testing.assert_allclose(
        rep.series("branch0_dist_l2"),
        (0.01305599915090499, 0.005489003057479222),
        rtol=1e-6)
    np.testing.assert_allclose(
        rep.series("branch0_dist_h1"),
        (0.022335127402043655, 0.017556984261903327),
        rtol=1e-6)
    # the sign-symmetric middle branch never moves
    assert max(rep.series("branch1_dist_h1")) < 1e-9


def test_equilibria_branch_table_schema():
    spec = dataclasses.replace(default_problem_spec(), nx=16, ny=16)
    rep = equilibria_branch_study(spec, eps_grid=(0.2,))
    table = rep.metadata["branch_table"]
    # one row per branch at the flat reference plus each grid point
    assert len(table) == 6
    expected_keys = ("epsilon", "branch", "residual", "morse_index",
                     "lambda_1", "lambda_2", "lambda_3", "lambda_4",
                     "dist_l2", "dist_h1")
    assert all(tuple(row.keys()) == expected_keys for row in table)
    flat_rows = [row for row in table if row["epsilon"] == 0.0]
    assert [row["branch"] for row in flat_rows] == [0, 1, 2]
    assert all(row["residual"] < 1e-8 for row in table)


# ---------------------------------------------------------------------------
# Attractor semidistance
# ---------------------------------------------------------------------------


def test_attractor_study_semidistance_shrinks_for_linear_decay():
    rep = attractor_semidistance_study(_trivial16())
    assert rep.passed, rep.summary_line()
    np.testing.assert_allclose(
        rep.series("semidistance_h1"),
        (0.0008493767637361957, 0.00030431873067799872, 3.7111562935912536e-05),
        rtol=1e-6)
    # 12 trajectories x 6 snapshots, plus the zero equilibrium
    assert rep.series("cloud_size") == (73.0, 73.0, 73.0)
    assert rep.series("equilibria_found") == (1.0, 1.0, 1.0)
    assert rep.series("lyapunov_violations") == (0.0, 0.0, 0.0)
    assert rep.metadata["reference_cloud_size"] == 73
    assert rep.metadata["reference_final_distance"] == pytest.approx(
        0.015391166073157835, rel=1e-6)
