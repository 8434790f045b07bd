"""Convergence studies sweeping the oscillation parameter toward zero.

Every study walks a strictly decreasing grid of oscillation parameters,
records scalar metrics at each grid point, and judges the monotonicity
or stability properties the limit problem predicts.  A failed property
never aborts a sweep: metrics stay finite and logged, the verdict simply
records the failure, and downstream consumers (CSV emitters, the
acceptance suite) decide what to do with it.

Monotone-decrease verdicts accept a resolution floor: when an entire
error sequence sits below the floor the quantity has converged to solver
noise and its ordering carries no information, so the verdict passes.
Floors are quoted per call site.
"""

from dataclasses import dataclass, field
from math import ceil, pi

import numpy as np

from .assembly import (
    assemble_limit_anomalous,
    assemble_stiffness_canonical,
    assemble_stiffness_plain,
    q1_interpolate,
)
from .equilibria import enumerate_equilibria, equilibrium_states, newton_equilibria
from .geometry import DiffeoFamily, boundary_average_limit, jacobian_min_on_grid
from .linalg import cg_solve, ddot, pencil_smallest
from .mesh import build_mesh, oscillation_resolving_rule
from .semiflow import ProblemSpec, build_operators, evolve, h1_norm, l2_norm

#: Fixed initial-condition protocol for attractor sampling: three constant
#: levels crossed with four low-frequency cosine modes.  The constants are
#: deliberately nonzero-mean: a zero-mean start lies on a symmetry-invariant
#: subspace of the flat problem that the oscillatory problems do not share,
#: so its finite-time trajectories measure symmetry breaking, not attractor
#: geometry.
IC_CONSTANTS = (-0.8, 0.2, 0.8)
IC_MODE_AMPLITUDE = 0.2

#: Snapshots per sampling window: states at t_transient + j*(t_sample/5),
#: j = 0..5, giving six states per trajectory.
SNAPSHOT_INTERVALS = 5

def _fixed_phase_epsilons(multiples, phase=0.5 * pi, period=2.0 * pi):
    """Grid points eps = 1/(period * m + phase), one per multiple m.

    Oscillatory averaging errors behave like C(theta) * eps where theta
    is the terminal phase 1/eps mod the oscillation period; C vanishes at
    whole periods and wobbles otherwise, so sampling at a fixed off-null
    phase exposes the clean decay envelope that arbitrary grids blur with
    phase noise.
    """
    return tuple(1.0 / (period * m + phase) for m in multiples)


_WRONG_LIMIT_GRID = _fixed_phase_epsilons((4, 8, 16, 32))
# The boundary weight sqrt(1 + cos^2) oscillates with period pi, and both
# whole- and half-period phases average it exactly; a quarter-period offset
# keeps the leading error term alive at every grid point.
_BOUNDARY_GRID = _fixed_phase_epsilons((2, 4, 8, 16, 32), phase=0.25 * pi, period=pi)


@dataclass(frozen=True)
class StudyReport:
    """Outcome of one parameter sweep.

    ``metrics`` holds one mapping per grid point, aligned with
    ``epsilons`` and sharing one key set; ``verdicts`` maps property
    names to booleans; ``metadata`` carries context such as mesh size
    and the minimum Jacobian determinant seen.
    """

    study: str
    epsilons: tuple
    metrics: tuple
    verdicts: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError(f"epsilon grid must be strictly decreasing, got {eps}")
        if len(self.metrics) != len(eps):
            raise ValueError(
                f"{len(self.metrics)} metric rows for {len(eps)} grid points"
            )
        keys = self.metric_names
        for e, row in zip(eps, self.metrics):
            if tuple(row.keys()) != keys:
                raise ValueError(f"metric keys at epsilon={e} differ from the first row")
            for name, value in row.items():
                if not np.isfinite(value):
                    raise ValueError(f"metric {name} at epsilon={e} is not finite")
        object.__setattr__(self, "epsilons", eps)

    @property
    def metric_names(self):
        return tuple(self.metrics[0].keys()) if self.metrics else ()

    @property
    def passed(self):
        return all(self.verdicts.values())

    def series(self, name):
        """One metric across the grid, in grid (decreasing epsilon) order."""
        return tuple(float(row[name]) for row in self.metrics)

    def summary_line(self):
        """Single-line digest: study name, overall verdict, failed properties."""
        failed = sorted(name for name, ok in self.verdicts.items() if not ok)
        tail = f" failed={','.join(failed)}" if failed else ""
        return f"study={self.study} grid={len(self.epsilons)} pass={self.passed}{tail}"


def strictly_decreasing(values, floor=0.0):
    """True when the sequence strictly decreases, or never rises above ``floor``.

    Sequences entirely at the floor have converged below measurement
    resolution; their ordering is noise and counts as a pass.
    """
    vals = [float(v) for v in values]
    if all(v <= floor for v in vals):
        return True
    return all(later < earlier for earlier, later in zip(vals, vals[1:]))


def _decreasing_grid(eps_grid, allow_zero=False):
    eps = tuple(float(e) for e in eps_grid)
    if not eps:
        raise ValueError("epsilon grid is empty")
    low = 0.0 if not allow_zero else -1.0
    if any(e <= low for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError(f"epsilon grid must be strictly decreasing and positive, got {eps}")
    return eps


# ---------------------------------------------------------------------------
# Resolvent convergence
# ---------------------------------------------------------------------------


def resolvent_convergence_study(spec, eps_grid=None, lam=-1.0, f_rhs=None,
                                profile="graded"):
    """Action-form resolvent convergence against the flat-square solve.

    Solves (A_eps - lam M_eps) u_eps = F for each grid point and compares
    with the flat solution in the unweighted L2 and H1 norms.  The load F
    is the flat-metric pairing of ``f_rhs`` with every basis hat, held
    fixed across the sweep so that u_eps and u_0 answer the same right
    hand side; pairing f_rhs through the eps-dependent mass would cancel
    the very metric deviation the study measures.
    """
    if lam >= 0.0:
        raise ValueError(f"resolvent probe needs lambda left of the spectrum, got {lam}")
    eps_grid = _decreasing_grid(spec.epsilon_list if eps_grid is None else eps_grid)
    ops0 = build_operators(spec, 0.0, profile)
    n = ops0.mesh.n_nodes
    rhs_field = np.ones(n) if f_rhs is None else np.asarray(f_rhs, dtype=float)
    if rhs_field.shape != (n,):
        raise ValueError(f"f_rhs has shape {rhs_field.shape}, mesh has {n} nodes")
    load = ops0.mass @ rhs_field
    tol = spec.tolerances.linear
    u0, _ = cg_solve(ops0.stiffness + ops0.mass.scaled(-lam), load, tol=tol)

    rows = []
    for eps in eps_grid:
        ops = build_operators(spec, eps, profile)
        u_eps, _ = cg_solve(ops.stiffness + ops.mass.scaled(-lam), load, tol=tol, x0=u0)
        diff = u_eps - u0
        rows.append({
            "err_l2": l2_norm(ops0, diff),
            "err_h1": h1_norm(ops0, diff),
            "jacobian_min": jacobian_min_on_grid(ops.fam),
        })

    verdicts = {
        "l2_error_decreasing": strictly_decreasing([r["err_l2"] for r in rows], 1e-11),
        "h1_error_decreasing": strictly_decreasing([r["err_h1"] for r in rows], 1e-11),
    }
    metadata = {
        "nx": spec.nx, "ny": spec.ny, "lambda": float(lam), "profile": profile,
        "reference_min": float(u0.min()), "reference_max": float(u0.max()),
    }
    if np.ptp(rhs_field) == 0.0 and rhs_field[0] != 0.0:
        expected = float(rhs_field[0] / (spec.a - lam))
        anchor_err = float(np.abs(u0 - expected).max())
        metadata["constant_reference_expected"] = expected
        metadata["constant_reference_error"] = anchor_err
        verdicts["reference_constant_anchor"] = anchor_err <= 1e-8
    return StudyReport("resolvent", eps_grid, tuple(rows), verdicts, metadata)


# ---------------------------------------------------------------------------
# Eigenvalue convergence
# ---------------------------------------------------------------------------


def eigenvalue_convergence_study(spec, eps_grid=None, k=4, profile="graded"):
    """First-k pencil eigenvalues per grid point against the flat reference.

    Deviations |lambda_j(eps) - lambda_j(0)| are taken after both spectra
    are sorted ascending with multiplicity, matching branches by order.
    """
    if not 1 <= k <= 6:
        raise ValueError(f"k must lie in 1..6, got {k}")
    eps_grid = _decreasing_grid(spec.epsilon_list if eps_grid is None else eps_grid)
    ops0 = build_operators(spec, 0.0, profile)
    tol = spec.tolerances.eigen
    ref = [p.value for p in pencil_smallest(ops0.stiffness, ops0.mass, k, tol=tol)]

    rows = []
    for eps in eps_grid:
        ops = build_operators(spec, eps, profile)
        vals = [p.value for p in pencil_smallest(ops.stiffness, ops.mass, k, tol=tol)]
        row = {}
        for j, (v, r) in enumerate(zip(vals, ref), start=1):
            row[f"lambda_{j}"] = float(v)
            row[f"dev_{j}"] = abs(float(v) - float(r))
        row["jacobian_min"] = jacobian_min_on_grid(ops.fam)
        rows.append(row)

    verdicts = {
        "ground_state_anchor": abs(ref[0] - spec.a) <= 0.005 * abs(spec.a),
        "dev_1_decreasing": strictly_decreasing([row["dev_1"] for row in rows], 1e-10),
    }
    if k >= 3:
        # The flat square's second eigenvalue is double; its two discrete
        # branches can swap order under perturbation, so only the pairwise
        # maximum deviation is a stable convergence reading.  Deviations of
        # higher eigenvalues are recorded but carry no verdict: at the
        # largest grid points they sit outside the asymptotic regime.
        verdicts["degenerate_pair_decreasing"] = strictly_decreasing(
            [max(row["dev_2"], row["dev_3"]) for row in rows], 1e-10)
    metadata = {
        "nx": spec.nx, "ny": spec.ny, "profile": profile,
        "reference_eigenvalues": [float(v) for v in ref],
    }
    return StudyReport("eigs", eps_grid, tuple(rows), verdicts, metadata)


# ---------------------------------------------------------------------------
# Wrong-limit demonstration (canonical metric, linear profile)
# ---------------------------------------------------------------------------


def wrong_limit_study(mesh, rule, eps_grid=None, a=0.0):
    """Canonical-metric pullback versus naive and anomalous limit forms.

    For probe interpolant pairs (u, psi) the study evaluates the
    canonical form c_eps(u, psi) with oscillation-resolving quadrature,
    the plain form p = grad-grad + a-mass, and the anomalous limit form,
    recording gap_wrong = |c_eps - p| and gap_right = |c_eps - anomalous|.
    The plain and limit forms use the caller's ``rule``; each canonical
    assembly resolves its own oscillation scale.
    """
    eps_grid = _decreasing_grid(_WRONG_LIMIT_GRID if eps_grid is None else eps_grid)
    u_x2 = q1_interpolate(mesh, lambda x, y: y)
    u_x1 = q1_interpolate(mesh, lambda x, y: x)
    u_x2sq = q1_interpolate(mesh, lambda x, y: y * y)
    probes = (("x2_x2", u_x2, u_x2), ("x1_x1", u_x1, u_x1), ("x2sq_x2", u_x2sq, u_x2))

    plain = assemble_stiffness_plain(mesh, rule, a)
    anomalous = assemble_limit_anomalous(mesh, rule, a)
    rows = []
    for eps in eps_grid:
        fam = DiffeoFamily(eps, "linear")
        rule_eps = oscillation_resolving_rule(fam, mesh)
        canonical = assemble_stiffness_canonical(eps, mesh, rule_eps, a)
        row = {}
        for name, trial, test in probes:
            c_val = canonical.form_value(trial, test)
            row[f"form_{name}"] = float(c_val)
            row[f"gap_wrong_{name}"] = abs(c_val - plain.form_value(trial, test))
            row[f"gap_right_{name}"] = abs(c_val - anomalous.form_value(trial, test))
        row["panels"] = float(rule_eps.panels_per_element)
        rows.append(row)

    wrong_tail = [row["gap_wrong_x2_x2"] for e, row in zip(eps_grid, rows) if e <= 0.0101]
    verdicts = {
        "x2_x2_wrong_gap_near_third": bool(wrong_tail)
        and all(0.30 <= g <= 0.37 for g in wrong_tail),
        "x2_x2_right_gap_decreasing": strictly_decreasing(
            [row["gap_right_x2_x2"] for row in rows], 1e-10),
        "x2_x2_right_gap_small": rows[-1]["gap_right_x2_x2"] < 0.02,
        "x1_x1_wrong_gap_vanishing": strictly_decreasing(
            [row["gap_wrong_x1_x1"] for row in rows], 1e-10),
        "x2sq_x2_right_gap_decreasing": strictly_decreasing(
            [row["gap_right_x2sq_x2"] for row in rows], 1e-10),
    }
    metadata = {"nx": mesh.nx, "ny": mesh.ny, "a": float(a), "profile": "linear"}
    return StudyReport("wronglimit", eps_grid, tuple(rows), verdicts, metadata)


# ---------------------------------------------------------------------------
# Boundary-average homogenization
# ---------------------------------------------------------------------------


def _panelled_line_integral(f, panels, order=5):
    """Composite Gauss integral of f over [0,1] with the given panel count."""
    g, gw = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (g + 1.0)
    w = 0.5 * gw / panels
    offsets = np.arange(panels)[:, None]
    s = ((offsets + t[None, :]) / panels).ravel()
    return float(np.sum(f(s) * np.tile(w, panels)))


def _oscillation_panels(eps):
    return max(1, ceil(1.0 / (pi * eps / 4.0)))


def boundary_average_study(eps_grid=None, v=None):
    """Weak-star averaging of the top-edge weight against fixed probes.

    Measures |integral of sqrt(1+cos^2(s/eps)) v(s) - M (integral of v)|
    with M the one-period mean, via quadrature resolving eight panels per
    oscillation period.  Defaults probe v = 1, s, s^2; a caller-supplied
    ``v`` replaces them with a single probe.
    """
    eps_grid = _decreasing_grid(_BOUNDARY_GRID if eps_grid is None else eps_grid)
    if v is None:
        probes = (("const", lambda s: np.ones_like(s)),
                  ("linear", lambda s: s),
                  ("quadratic", lambda s: s * s))
    else:
        probes = (("custom", v),)
    mean_weight = boundary_average_limit()
    plain_integrals = {name: _panelled_line_integral(fn, 64) for name, fn in probes}

    def error_at(eps, fn, name):
        osc = _panelled_line_integral(
            lambda s: np.sqrt(1.0 + np.cos(s / eps) ** 2) * fn(s),
            _oscillation_panels(eps))
        return abs(osc - mean_weight * plain_integrals[name])

    rows = []
    for eps in eps_grid:
        row = {f"err_{name}": error_at(eps, fn, name) for name, fn in probes}
        row["panels"] = float(_oscillation_panels(eps))
        rows.append(row)

    log_eps = np.log(np.asarray(eps_grid))
    centered = log_eps - log_eps.mean()
    verdicts = {}
    metadata = {"mean_weight": mean_weight, "probe_count": len(probes)}
    for name, _ in probes:
        errs = np.asarray([row[f"err_{name}"] for row in rows])
        slope = float(np.dot(centered, np.log(errs) - np.log(errs).mean())
                      / np.dot(centered, centered))
        metadata[f"slope_{name}"] = slope
        verdicts[f"slope_near_one_{name}"] = 0.7 <= slope <= 1.3
    if v is None:
        whole_eps = 1.0 / (20.0 * pi)
        whole_osc = _panelled_line_integral(
            lambda s: np.sqrt(1.0 + np.cos(s / whole_eps) ** 2),
            2 * _oscillation_panels(whole_eps), order=7)
        whole_err = abs(whole_osc - mean_weight)
        metadata["whole_period_epsilon"] = whole_eps
        metadata["whole_period_error"] = whole_err
        verdicts["whole_period_exactness"] = whole_err <= 1e-12
        for eps, row in zip(eps_grid, rows):
            if eps == 0.1:
                verdicts["const_error_small_at_0p1"] = row["err_const"] < 0.03
    return StudyReport("boundary", eps_grid, tuple(rows), verdicts, metadata)


# ---------------------------------------------------------------------------
# Seeded evolution (dissipativity spot check)
# ---------------------------------------------------------------------------


def evolution_study(spec, eps_grid=None, seed=0, profile="graded"):
    """Energy descent along one seeded random low-frequency trajectory.

    Draws a random combination of the constant and the four lowest cosine
    modes, evolves it over the spec horizon at every grid point, and
    verifies the Lyapunov sequence never rises beyond the step slack.
    """
    eps_grid = _decreasing_grid(spec.epsilon_list if eps_grid is None else eps_grid)
    rng = np.random.default_rng(seed)
    const = rng.uniform(-0.8, 0.8)
    weights = rng.uniform(-0.3, 0.3, size=4)
    mesh = build_mesh(spec.nx, spec.ny)
    u0 = const * np.ones(mesh.n_nodes)
    for w, mode in zip(weights, _cosine_modes(mesh)):
        u0 = u0 + w * mode

    slack = spec.tolerances.lyapunov_slack
    rows = []
    total_violations = 0
    for eps in eps_grid:
        ops = build_operators(spec, eps, profile)
        traj = evolve(spec, ops, u0)
        violations = _lyapunov_violations(traj, slack)
        total_violations += violations
        rows.append({
            "final_energy": float(traj.lyapunov[-1]),
            "final_h1": float(traj.h1_norms[-1]),
            "lyapunov_violations": float(violations),
            "jacobian_min": jacobian_min_on_grid(ops.fam),
        })
    verdicts = {"lyapunov_monotone": total_violations == 0}
    metadata = {
        "nx": spec.nx, "ny": spec.ny, "seed": int(seed), "profile": profile,
        "ic_constant": float(const), "ic_mode_weights": [float(w) for w in weights],
    }
    return StudyReport("evolve", eps_grid, tuple(rows), verdicts, metadata)


# ---------------------------------------------------------------------------
# Equilibria branch continuation
# ---------------------------------------------------------------------------


def equilibria_branch_study(spec, eps_grid=None, profile="graded"):
    """Branch continuation table: spectra and flat-branch distances per leg.

    Enumerates the flat-square equilibria, then continues each branch
    through the grid in ascending order with warm starts, classifying
    every leg.  Emits flattened per-branch metrics plus the row-form
    table (epsilon, branch, residual, morse index, leading spectrum,
    distances) in the metadata for the external report.
    """
    eps_grid = _decreasing_grid(spec.epsilon_list if eps_grid is None else eps_grid)
    ops0 = build_operators(spec, 0.0, profile)
    records0 = enumerate_equilibria(spec, ops0)
    if not records0:
        raise ValueError("no flat-square equilibria found; nothing to continue")

    legs = {}
    for b, rec0 in enumerate(records0):
        state = rec0.state
        for eps in sorted(eps_grid):
            ops = build_operators(spec, eps, profile)
            rec = newton_equilibria(spec, ops, state)
            state = rec.state
            legs[(eps, b)] = (rec, l2_norm(ops0, rec.state - rec0.state),
                              h1_norm(ops0, rec.state - rec0.state))

    def row_metrics(rec, dist_l2, dist_h1, prefix):
        head = list(rec.spectrum_head) + [0.0] * (4 - len(rec.spectrum_head))
        out = {
            f"{prefix}residual": float(rec.residual),
            f"{prefix}morse_index": float(rec.morse_index),
        }
        out.update({f"{prefix}lambda_{j}": float(v) for j, v in enumerate(head[:4], 1)})
        out[f"{prefix}dist_l2"] = dist_l2
        out[f"{prefix}dist_h1"] = dist_h1
        return out

    rows, table = [], []
    for b, rec0 in enumerate(records0):
        table.append(_table_row(0.0, b, rec0, 0.0, 0.0))
    for eps in eps_grid:
        row = {}
        for b in range(len(records0)):
            rec, dl2, dh1 = legs[(eps, b)]
            row.update(row_metrics(rec, dl2, dh1, f"branch{b}_"))
            table.append(_table_row(eps, b, rec, dl2, dh1))
        rows.append(row)

    branch_ids = range(len(records0))
    all_records = list(records0) + [legs[key][0] for key in legs]
    verdicts = {
        "all_hyperbolic": all(rec.hyperbolic for rec in all_records),
        "morse_indices_stable": all(
            legs[(eps, b)][0].morse_index == records0[b].morse_index
            for eps in eps_grid for b in branch_ids),
        "l2_distance_decreasing": all(
            strictly_decreasing([legs[(eps, b)][1] for eps in eps_grid], 1e-8)
            for b in branch_ids),
        "h1_distance_bounded": all(
            legs[(eps, b)][2] <= 0.1 for eps in eps_grid for b in branch_ids),
        "h1_norm_variation_bounded": _branch_norm_variation_ok(
            spec, ops0, records0, legs, eps_grid),
    }
    metadata = {
        "nx": spec.nx, "ny": spec.ny, "profile": profile,
        "branch_count": len(records0),
        "branch_means": [float(np.mean(rec.state)) for rec in records0],
        "branch_table": tuple(table),
    }
    return StudyReport("equilibria", eps_grid, tuple(rows), verdicts, metadata)


def _table_row(eps, branch, rec, dist_l2, dist_h1):
    head = list(rec.spectrum_head) + [0.0] * (4 - len(rec.spectrum_head))
    row = {"epsilon": float(eps), "branch": float(branch),
           "residual": float(rec.residual), "morse_index": float(rec.morse_index)}
    row.update({f"lambda_{j}": float(v) for j, v in enumerate(head[:4], 1)})
    row["dist_l2"] = float(dist_l2)
    row["dist_h1"] = float(dist_h1)
    return row


def _branch_norm_variation_ok(spec, ops0, records0, legs, eps_grid, limit=0.2):
    """Per-branch H1-norm spread across the grid stays within ``limit``.

    Branches whose flat norm is below 1e-6 (the trivial zero state) are
    skipped: relative variation of a zero norm is undefined.
    """
    for b, rec0 in enumerate(records0):
        norms = [h1_norm(ops0, rec0.state)]
        norms += [h1_norm(ops0, legs[(eps, b)][0].state) for eps in eps_grid]
        if max(norms) <= 1e-6:
            continue
        if max(norms) / max(min(norms), 1e-300) - 1.0 > limit:
            return False
    return True


# ---------------------------------------------------------------------------
# Attractor semidistance
# ---------------------------------------------------------------------------


def default_initial_conditions(mesh):
    """The fixed 12-point protocol: IC_CONSTANTS crossed with cosine modes."""
    modes = _cosine_modes(mesh)
    ones = np.ones(mesh.n_nodes)
    return [c * ones + IC_MODE_AMPLITUDE * m for c in IC_CONSTANTS for m in modes]


def _cosine_modes(mesh):
    return [
        q1_interpolate(mesh, lambda x, y: np.cos(pi * x)),
        q1_interpolate(mesh, lambda x, y: np.cos(pi * y)),
        q1_interpolate(mesh, lambda x, y: np.cos(pi * x) * np.cos(pi * y)),
        q1_interpolate(mesh, lambda x, y: np.cos(2.0 * pi * x)),
    ]


def _lyapunov_violations(traj, slack):
    v = np.asarray(traj.lyapunov)
    allowed = v[:-1] + slack * (1.0 + np.abs(v[:-1]))
    return int(np.sum(v[1:] > allowed))


def _sample_cloud(spec, ops, ic_grid, t_transient, t_sample):
    """Trajectory snapshots plus equilibria for one grid point.

    Returns (points, lyapunov violation count, max final-state distance to
    the nearest found equilibrium in H1).
    """
    dt = spec.dt
    idx0 = int(round(t_transient / dt))
    stride = max(1, int(round(t_sample / SNAPSHOT_INTERVALS / dt)))
    last = idx0 + SNAPSHOT_INTERVALS * stride
    points, finals = [], []
    violations = 0
    for u0 in ic_grid:
        traj = evolve(spec, ops, u0, t_final=t_transient + t_sample)
        violations += _lyapunov_violations(traj, spec.tolerances.lyapunov_slack)
        points.extend(traj.states[idx0:last + 1:stride])
        finals.append(traj.states[-1])
    states = equilibrium_states(spec, ops)
    points.extend(states)
    final_dist = 0.0
    if states:
        final_dist = max(
            min(h1_norm(ops, f - s) for s in states) for f in finals
        )
    return np.asarray(points), violations, final_dist, len(states)


def _hausdorff_semidistance(gram, sample, reference):
    """max over sample points of the min gram-norm distance into reference."""
    gram_ref = [gram @ y for y in reference]
    sq_ref = np.asarray([ddot(y, gy) for y, gy in zip(reference, gram_ref)])
    worst = 0.0
    for x in sample:
        sq_x = ddot(x, gram @ x)
        cross = np.asarray([ddot(x, gy) for gy in gram_ref])
        nearest = float(np.min(sq_x + sq_ref - 2.0 * cross))
        worst = max(worst, float(np.sqrt(max(nearest, 0.0))))
    return worst


def attractor_semidistance_study(spec, eps_grid=None, ic_grid=None,
                                 t_transient=6.0, t_sample=2.0, profile="graded"):
    """One-sided Hausdorff distance from sampled attractors to the flat one.

    Every grid point and the flat reference are sampled identically:
    each initial condition evolves to t_transient, six snapshots cover
    [t_transient, t_transient + t_sample], and all found equilibria join
    the cloud.  The semidistance max-min reduces over the discrete H1
    norm.  Blowups propagate; the spec must validate as dissipative.
    """
    spec.validate()
    eps_grid = _decreasing_grid(spec.epsilon_list if eps_grid is None else eps_grid)
    if t_transient < 0.0 or t_sample <= 0.0:
        raise ValueError("need t_transient >= 0 and t_sample > 0")
    ops0 = build_operators(spec, 0.0, profile)
    if ic_grid is None:
        ic_grid = default_initial_conditions(ops0.mesh)
    ic_grid = [np.asarray(u, dtype=float) for u in ic_grid]
    if not ic_grid:
        raise ValueError("initial-condition grid is empty")

    reference, ref_violations, ref_final_dist, ref_eq = _sample_cloud(
        spec, ops0, ic_grid, t_transient, t_sample)
    rows = []
    total_violations = ref_violations
    for eps in eps_grid:
        ops = build_operators(spec, eps, profile)
        cloud, violations, _, n_eq = _sample_cloud(spec, ops, ic_grid,
                                                   t_transient, t_sample)
        total_violations += violations
        rows.append({
            "semidistance_h1": _hausdorff_semidistance(ops0.h1_gram, cloud, reference),
            "cloud_size": float(len(cloud)),
            "equilibria_found": float(n_eq),
            "lyapunov_violations": float(violations),
            "jacobian_min": jacobian_min_on_grid(ops.fam),
        })

    verdicts = {
        "semidistance_decreasing": strictly_decreasing(
            [r["semidistance_h1"] for r in rows], 1e-6),
        "lyapunov_monotone": total_violations == 0,
    }
    metadata = {
        "nx": spec.nx, "ny": spec.ny, "profile": profile,
        "t_transient": float(t_transient), "t_sample": float(t_sample),
        "initial_conditions": len(ic_grid),
        "snapshots_per_trajectory": SNAPSHOT_INTERVALS + 1,
        "reference_cloud_size": len(reference),
        "reference_equilibria": ref_eq,
        "reference_final_distance": ref_final_dist,
        "reference_lyapunov_violations": ref_violations,
    }
    return StudyReport("attractor", eps_grid, tuple(rows), verdicts, metadata)
