"""Steady states: Newton iteration, linearized spectra, branch continuation.

An equilibrium solves the nodal balance A u = F(u) + G(u) with A the
adapted elliptic operator (zero-order block included) and F, G the
reaction loads.  Newton steps solve the symmetric linearization

    L(u) = A - F_u(u) - G_u(u)

with conjugate gradients when it is definite and a MINRES fallback when
the curvature check trips; a solve that fails both ways surfaces as
SingularLinearization.  Residuals are measured in the mass-weighted dual
norm sqrt(r^T M^{-1} r), which is mesh-size stable.

The spectrum head of L classifies each steady state: the count of
negative pencil eigenvalues is its instability index, and a smallest
magnitude above the gap threshold declares it hyperbolic.
"""

from dataclasses import dataclass

import numpy as np

from .assembly import (
    assemble_boundary_mass,
    assemble_mass,
    assemble_stiffness_adapted,
    nonlinear_boundary_jacobian,
    nonlinear_volume_jacobian,
    q1_interpolate,
)
from .errors import (
    ContinuationLost,
    NewtonDiverged,
    NotConverged,
    SingularLinearization,
)
from .linalg import cg_solve, ddot, minres_solve, pencil_smallest
from .semiflow import (
    Zero,
    apply_boundary_load,
    apply_interior_load,
    build_operators,
    h1_norm,
    l2_norm,
)

HYPERBOLIC_GAP = 1.0e-3
SPECTRUM_HEAD = 4
_DEDUPE_TOL = 1.0e-4


@dataclass(frozen=True)
class EquilibriumRecord:
    """One converged steady state with its linearized classification."""

    epsilon: float
    state: np.ndarray
    residual: float
    spectrum_head: tuple
    morse_index: int
    hyperbolic: bool
    iterations: int


@dataclass(frozen=True)
class ContinuationLeg:
    """A branch point at one epsilon with distances to the flat solution."""

    epsilon: float
    record: EquilibriumRecord
    dist_l2: float
    dist_h1: float


def assemble_linearization(spec, fam, mesh, rule, u):
    """L(u) = A - F_u(u) - G_u(u): symmetric second variation at u."""
    L = assemble_stiffness_adapted(fam, mesh, rule, spec.a)
    if not isinstance(spec.f_kind, Zero):
        L = L - nonlinear_volume_jacobian(fam, mesh, rule, u, spec.f_kind.derivative)
    if not isinstance(spec.g_kind, Zero):
        L = L - nonlinear_boundary_jacobian(fam, mesh, rule, u, spec.g_kind.derivative)
    return L


def _residual_vector(spec, ops, u):
    return (ops.stiffness @ u
            - apply_interior_load(spec, ops.fam, ops.mesh, ops.rule, u)
            - apply_boundary_load(spec, ops.fam, ops.mesh, ops.rule, u))


def _dual_norm(ops, r):
    """sqrt(r^T M^{-1} r) via a mass solve (mass matrices are well conditioned)."""
    if not np.any(r):
        return 0.0
    z, _ = cg_solve(ops.mass, r, tol=1.0e-13, maxit=2000)
    return float(np.sqrt(max(ddot(r, z), 0.0)))


def _solve_linearization(L, rhs, tol, maxit):
    """CG first; MINRES when the curvature probe trips or CG stalls."""
    try:
        x, _ = cg_solve(L, rhs, tol=tol, maxit=maxit)
        return x
    except NotConverged as exc:
        x0 = None if exc.indefinite else exc.x
        try:
            x, _ = minres_solve(L, rhs, tol=tol, maxit=4 * maxit, x0=x0)
            return x
        except NotConverged as exc2:
            raise SingularLinearization(
                f"linearized solve failed under both CG and MINRES: {exc2}"
            ) from exc2


def classify_state(spec, ops, u, residual, iterations):
    """Attach the spectrum head of L(u) to a converged state."""
    L = assemble_linearization(spec, ops.fam, ops.mesh, ops.rule, u)
    pairs = pencil_smallest(L, ops.mass, SPECTRUM_HEAD, tol=spec.tolerances.eigen)
    head = tuple(p.value for p in pairs)
    morse = sum(1 for v in head if v < 0.0)
    hyperbolic = min(abs(v) for v in head) > HYPERBOLIC_GAP
    return EquilibriumRecord(
        epsilon=ops.fam.epsilon,
        state=u,
        residual=residual,
        spectrum_head=head,
        morse_index=morse,
        hyperbolic=hyperbolic,
        iterations=iterations,
    )


def _newton_iterate(spec, ops, u0, tol, maxit, linear_maxit):
    """The bare Newton loop; returns (state, residual, iterations)."""
    u = np.asarray(u0, dtype=float).copy()
    if u.shape != (ops.mesh.n_nodes,):
        raise ValueError(
            f"initial guess has shape {u.shape}, mesh has {ops.mesh.n_nodes} nodes"
        )
    previous = np.inf
    growth_streak = 0
    for it in range(maxit + 1):
        if not np.all(np.isfinite(u)):
            raise NewtonDiverged(f"iterate became non-finite at step {it}")
        r = _residual_vector(spec, ops, u)
        rn = _dual_norm(ops, r)
        if rn <= tol:
            return u, rn, it
        growth_streak = growth_streak + 1 if rn > previous else 0
        if growth_streak >= 5:
            raise NewtonDiverged(
                f"residual grew for 5 consecutive steps (now {rn:.3e})"
            )
        previous = rn
        L = assemble_linearization(spec, ops.fam, ops.mesh, ops.rule, u)
        delta = _solve_linearization(L, -r, spec.tolerances.linear, maxit=linear_maxit)
        u = u + delta
    raise NewtonDiverged(f"no convergence in {maxit} steps (residual {previous:.3e})")


def newton_equilibria(spec, ops, u0, tol=None, maxit=40, linear_maxit=5000):
    """Newton iteration from u0; returns the classified steady state.

    Raises NewtonDiverged on five consecutive residual increases or when
    maxit is exhausted, SingularLinearization when a step cannot be
    solved.
    """
    tol = spec.tolerances.newton if tol is None else float(tol)
    u, rn, it = _newton_iterate(spec, ops, u0, tol, maxit, linear_maxit)
    return classify_state(spec, ops, u, rn, it)


def _converged_candidates(spec, ops, tol=None, maxit=40):
    """Newton from the documented guess protocol; deduplicated, mean-sorted.

    Guesses are the three constants {-1, 0.01, 1} scaled to the flat
    problem's pitchfork amplitude sqrt(max(1-a, 0.01)), each also
    perturbed by the two lowest cosine modes.  Diverged runs are skipped.
    Returns (state, residual, iterations) triples without classification.
    """
    tol = spec.tolerances.newton if tol is None else float(tol)
    amp = float(np.sqrt(max(1.0 - spec.a, 0.01)))
    mesh = ops.mesh
    ones = np.ones(mesh.n_nodes)
    cos_x = q1_interpolate(mesh, lambda x, y: np.cos(np.pi * x))
    cos_y = q1_interpolate(mesh, lambda x, y: np.cos(np.pi * y))
    guesses = []
    for c in (-1.0, 0.01, 1.0):
        base = c * amp * ones
        guesses.append(base)
        guesses.append(base + 0.15 * amp * cos_x)
        guesses.append(base + 0.15 * amp * cos_y)
    found = []
    for guess in guesses:
        try:
            u, rn, it = _newton_iterate(spec, ops, guess, tol, maxit, 5000)
        except (NewtonDiverged, SingularLinearization):
            continue
        is_new = all(
            h1_norm(ops, u - other[0]) > _DEDUPE_TOL * (1.0 + h1_norm(ops, other[0]))
            for other in found
        )
        if is_new:
            found.append((u, rn, it))
    found.sort(key=lambda cand: float(np.mean(cand[0])))
    return found


def equilibrium_states(spec, ops, tol=None, maxit=40):
    """Steady states from the guess protocol, cheapest form: no spectra."""
    return [u for u, _, _ in _converged_candidates(spec, ops, tol=tol, maxit=maxit)]


def enumerate_equilibria(spec, ops, tol=None, maxit=40):
    """Classified steady states from the guess protocol, mean-sorted."""
    return [
        classify_state(spec, ops, u, rn, it)
        for u, rn, it in _converged_candidates(spec, ops, tol=tol, maxit=maxit)
    ]


def continue_in_epsilon(spec, eps_list, record0, profile="graded", tol=None, maxit=40):
    """Warm-started continuation of one flat branch through ascending epsilon.

    Returns one leg per epsilon with the L2 and H1 distances to the flat
    state.  A diverged leg raises ContinuationLost carrying the legs that
    did converge.
    """
    legs = []
    state = record0.state
    for eps in sorted(float(e) for e in eps_list):
        ops = build_operators(spec, eps, profile)
        try:
            record = newton_equilibria(spec, ops, state, tol=tol, maxit=maxit)
        except (NewtonDiverged, SingularLinearization) as exc:
            raise ContinuationLost(
                f"branch lost at epsilon={eps}: {exc}", legs=legs
            ) from exc
        legs.append(ContinuationLeg(
            epsilon=eps,
            record=record,
            dist_l2=l2_norm(ops, record.state - record0.state),
            dist_h1=h1_norm(ops, record.state - record0.state),
        ))
        state = record.state
    return legs


def robin_first_eigenvalue(spec, fam, mesh, rule):
    """Ground eigenvalue of the dissipativity pencil.

    The operator is the adapted stiffness with zero-order coefficient
    (a - c0) minus d0 times the boundary mass; its first pencil
    eigenvalue against the adapted mass must stay positive for the
    semiflow to be dissipative.
    """
    shifted = spec.a - spec.c0
    S = assemble_stiffness_adapted(fam, mesh, rule, shifted)
    if spec.d0 != 0.0:
        S = S - assemble_boundary_mass(fam, mesh, rule).scaled(spec.d0)
    M = assemble_mass(fam, mesh, rule)
    pairs = pencil_smallest(S, M, 1, tol=spec.tolerances.eigen)
    return float(pairs[0].value)
