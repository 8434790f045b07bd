"""Nonlinear semigroup: reaction terms, problem configuration, IMEX stepping.

Nodal fields are plain float vectors of length (nx+1)(ny+1).  The built-in
nonlinearities expose ``value``, ``derivative`` and ``primitive`` (the
antiderivative vanishing at 0) as vectorized callables, plus the growth
and dissipativity constants their hypotheses are tested against.

The time stepper is implicit in the linear elliptic part and explicit in
the reaction terms: each step solves

    (M + dt A) u_next = M u + dt (interior load + boundary load)

where A already contains the zero-order a-mass block, so the interior load
carries the reaction term only.  The energy functional pairs the quadratic
part 0.5 u^T A u with the integrated primitives; it decreases along steps,
which the trajectory records for the gradient-structure checks.
"""

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .assembly import (
    assemble_boundary_mass,
    assemble_mass,
    assemble_stiffness_adapted,
    nonlinear_boundary_functional,
    nonlinear_boundary_load,
    nonlinear_volume_functional,
    nonlinear_volume_load,
)
from .errors import BlowupDetected, ConfigInvalid
from .geometry import DiffeoFamily
from .linalg import cg_solve, ddot
from .mesh import build_mesh, oscillation_resolving_rule

BLOWUP_GUARD = 1.0e6
_DISSIPATIVITY_SAMPLES = (1.0e3, 1.0e4)

# ---------------------------------------------------------------------------
# Reaction terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubicSaturated:
    """u - u^3 inside |u| <= r, extended with the C1 linear clamp outside.

    Outside the clip radius the slope freezes at 1 - 3r^2, so the
    derivative stays bounded while every |u| <= r value (all of the
    desk-scale dynamics) is the plain cubic.  Odd; primitive even.
    """

    r: float = 10.0

    label = "cubic_saturated"
    growth_exponent = 2

    def __post_init__(self):
        if not self.r > 0.0:
            raise ValueError(f"clip radius must be positive, got r={self.r}")

    def value(self, u):
        u = np.asarray(u, dtype=float)
        v = np.clip(u, -self.r, self.r)
        inner = v - v**3
        slope = 1.0 - 3.0 * self.r**2
        return inner + slope * (u - v)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        v = np.clip(u, -self.r, self.r)
        return 1.0 - 3.0 * v**2

    def primitive(self, u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        v = np.minimum(a, self.r)
        inner = 0.5 * v**2 - 0.25 * v**4
        tail = a - v
        f_r = self.r - self.r**3
        slope = 1.0 - 3.0 * self.r**2
        return inner + f_r * tail + 0.5 * slope * tail**2

    @property
    def growth_constant(self):
        """L with |f(u)-f(v)| <= L (1 + u^2 + v^2)|u - v| for all u, v."""
        return 3.0

    @property
    def linear_cap(self):
        """Limit of f(u)/u as |u| grows: the clamp slope."""
        return 1.0 - 3.0 * self.r**2

    def as_config(self):
        return {"kind": self.label, "r": self.r}


@dataclass(frozen=True)
class ScaledTanh:
    """d * tanh(u): bounded with bounded derivatives and zero linear cap."""

    d: float = 0.1

    label = "scaled_tanh"
    growth_exponent = 1

    def value(self, u):
        return self.d * np.tanh(np.asarray(u, dtype=float))

    def derivative(self, u):
        t = np.tanh(np.asarray(u, dtype=float))
        return self.d * (1.0 - t * t)

    def primitive(self, u):
        # d * log cosh(u), evaluated as |u| + log1p(e^{-2|u|}) - log 2
        a = np.abs(np.asarray(u, dtype=float))
        return self.d * (a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0))

    @property
    def growth_constant(self):
        return abs(self.d)

    @property
    def linear_cap(self):
        return 0.0

    def as_config(self):
        return {"kind": self.label, "d": self.d}


@dataclass(frozen=True)
class Zero:
    """Absent reaction term: value, derivative and primitive all vanish."""

    label = "zero"
    growth_exponent = 0

    def value(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def derivative(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def primitive(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    @property
    def growth_constant(self):
        return 0.0

    @property
    def linear_cap(self):
        return 0.0

    def as_config(self):
        return {"kind": self.label}


_INTERIOR_KINDS = {"cubic_saturated": CubicSaturated, "zero": Zero}
_BOUNDARY_KINDS = {"scaled_tanh": ScaledTanh, "zero": Zero}


def nonlinearity_from_config(entry, role):
    """Rebuild a reaction term from its ``as_config`` dict.

    ``role`` is "f" (interior: cubic_saturated or zero) or "g" (boundary:
    scaled_tanh or zero).
    """
    table = _INTERIOR_KINDS if role == "f" else _BOUNDARY_KINDS
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ConfigInvalid(f"nonlinearity {role}: expected a dict with a 'kind' key")
    kind = entry["kind"]
    if kind not in table:
        raise ConfigInvalid(
            f"nonlinearity {role}: unknown kind {kind!r}; "
            f"choose one of {sorted(table)}"
        )
    params = {k: v for k, v in entry.items() if k != "kind"}
    try:
        return table[kind](**params)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"nonlinearity {role}: {exc}") from exc


# ---------------------------------------------------------------------------
# Problem configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tolerances:
    """Solver tolerances shared by the stepping and study code."""

    linear: float = 1.0e-10
    newton: float = 1.0e-9
    eigen: float = 1.0e-8
    lyapunov_slack: float = 1.0e-8

    def as_config(self):
        return {
            "linear": self.linear,
            "newton": self.newton,
            "eigen": self.eigen,
            "lyapunov_slack": self.lyapunov_slack,
        }


@dataclass(frozen=True)
class ProblemSpec:
    """Full configuration of the semilinear problem and its discretization.

    ``a`` is the zero-order coefficient of the linear part, ``c0`` and
    ``d0`` the dissipativity budget split between the interior and
    boundary terms.  ``validate`` checks every hypothesis the analysis
    rests on and raises :class:`ConfigInvalid` naming the violated one.
    """

    a: float = 0.5
    f_kind: object = field(default_factory=CubicSaturated)
    g_kind: object = field(default_factory=ScaledTanh)
    d0: float = 0.1
    c0: float = -0.5
    epsilon_list: tuple = (0.2, 0.1, 0.05, 0.025)
    nx: int = 48
    ny: int = 48
    dt: float = 0.02
    t_final: float = 8.0
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        object.__setattr__(self, "epsilon_list", tuple(float(e) for e in self.epsilon_list))

    def validate(self):
        """Raise ConfigInvalid listing every violated hypothesis."""
        problems = []
        if not (np.isfinite(self.a) and self.a > 0.0):
            problems.append(f"positivity: a must be a positive real, got a={self.a}")
        if not (isinstance(self.nx, int) and isinstance(self.ny, int)
                and self.nx >= 2 and self.ny >= 2):
            problems.append(f"mesh: nx and ny must be integers >= 2, got {self.nx}x{self.ny}")
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            problems.append(f"time step: dt must be positive, got dt={self.dt}")
        if not (np.isfinite(self.t_final) and self.t_final > 0.0):
            problems.append(f"time horizon: t_final must be positive, got {self.t_final}")
        eps = self.epsilon_list
        if (len(eps) == 0
                or any(not (np.isfinite(e) and e > 0.0) for e in eps)
                or any(b >= a for a, b in zip(eps, eps[1:]))):
            problems.append(
                "epsilon grid: epsilon_list must be strictly decreasing positive reals, "
                f"got {eps}"
            )
        tols = self.tolerances.as_config()
        if any(not (np.isfinite(v) and v > 0.0) for v in tols.values()):
            problems.append(f"tolerances: all solver tolerances must be positive, got {tols}")
        problems += self._reaction_problems()
        if problems:
            raise ConfigInvalid("; ".join(problems))

    def _reaction_problems(self):
        problems = []
        for role, kind in (("f", self.f_kind), ("g", self.g_kind)):
            table = _INTERIOR_KINDS if role == "f" else _BOUNDARY_KINDS
            if not isinstance(kind, tuple(table.values())):
                problems.append(
                    f"nonlinearity {role}: expected one of {sorted(table)}, "
                    f"got {type(kind).__name__}"
                )
        if problems:
            return problems
        # growth: |f(u)-f(v)| <= L (1 + |u|^p + |v|^p) |u - v| on a sample grid
        us = np.linspace(-100.0, 100.0, 33)
        for role, kind in (("f", self.f_kind), ("g", self.g_kind)):
            u1, u2 = np.meshgrid(us, us)
            gap = np.abs(kind.value(u1) - kind.value(u2))
            p = kind.growth_exponent
            bound = kind.growth_constant * (1.0 + np.abs(u1)**p + np.abs(u2)**p)
            if np.any(gap > bound * np.abs(u1 - u2) + 1.0e-9):
                problems.append(
                    f"growth: {role} exceeds its Lipschitz bound of exponent {p}"
                )
        # dissipativity: sampled sector conditions for large |u|
        for s in _DISSIPATIVITY_SAMPLES:
            for u in (s, -s):
                if float(self.f_kind.value(u)) / u > self.c0 + 1.0e-9:
                    problems.append(
                        f"dissipativity: f(u)/u must stay <= c0={self.c0} for large |u|, "
                        f"violated at u={u}"
                    )
                    break
            else:
                continue
            break
        g_cap = self.g_kind.linear_cap
        if not g_cap < self.d0:
            problems.append(
                f"dissipativity: g needs a linear cap d0' < d0, got d0'={g_cap}, d0={self.d0}"
            )
        else:
            for s in _DISSIPATIVITY_SAMPLES:
                for u in (s, -s):
                    if float(self.g_kind.value(u)) / u > self.d0 + 1.0e-9:
                        problems.append(
                            f"dissipativity: g(u)/u must stay <= d0={self.d0} for "
                            f"large |u|, violated at u={u}"
                        )
                        break
                else:
                    continue
                break
        if not self.c0 < self.a:
            problems.append(
                f"dissipativity: need c0 < a so the shifted operator stays elliptic, "
                f"got c0={self.c0}, a={self.a}"
            )
        return problems

    def as_config(self):
        return {
            "a": self.a,
            "f": self.f_kind.as_config(),
            "g": self.g_kind.as_config(),
            "d0": self.d0,
            "c0": self.c0,
            "epsilon_list": list(self.epsilon_list),
            "nx": self.nx,
            "ny": self.ny,
            "dt": self.dt,
            "t_final": self.t_final,
            "tolerances": self.tolerances.as_config(),
        }

    @classmethod
    def from_config(cls, entry):
        if not isinstance(entry, dict):
            raise ConfigInvalid("problem spec: expected a JSON object")
        known = {"a", "f", "g", "d0", "c0", "epsilon_list", "nx", "ny",
                 "dt", "t_final", "tolerances"}
        extra = set(entry) - known
        if extra:
            raise ConfigInvalid(f"problem spec: unknown keys {sorted(extra)}")
        kwargs = {}
        for key in ("a", "d0", "c0", "dt", "t_final"):
            if key in entry:
                kwargs[key] = float(entry[key])
        for key in ("nx", "ny"):
            if key in entry:
                kwargs[key] = int(entry[key])
        if "f" in entry:
            kwargs["f_kind"] = nonlinearity_from_config(entry["f"], "f")
        if "g" in entry:
            kwargs["g_kind"] = nonlinearity_from_config(entry["g"], "g")
        if "epsilon_list" in entry:
            kwargs["epsilon_list"] = tuple(float(e) for e in entry["epsilon_list"])
        if "tolerances" in entry:
            tol_entry = entry["tolerances"]
            if not isinstance(tol_entry, dict):
                raise ConfigInvalid("tolerances: expected a JSON object")
            try:
                kwargs["tolerances"] = Tolerances(**{k: float(v) for k, v in tol_entry.items()})
            except TypeError as exc:
                raise ConfigInvalid(f"tolerances: {exc}") from exc
        spec = cls(**kwargs)
        spec.validate()
        return spec


def default_problem_spec():
    """The saturated-cubic interior term with a tanh boundary term."""
    return ProblemSpec()


def trivial_problem_spec():
    """Linear decay problem (both reaction terms absent) on a small mesh."""
    return ProblemSpec(
        f_kind=Zero(), g_kind=Zero(), c0=0.0,
        epsilon_list=(0.2, 0.1, 0.05), nx=16, ny=16, dt=0.05, t_final=1.0,
    )


# ---------------------------------------------------------------------------
# Operators and loads
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Operators:
    """Assembled matrices for one perturbation amplitude.

    ``stiffness`` is the adapted elliptic operator including the a-mass
    block; ``mass`` and ``boundary_mass`` carry the adapted volume and
    boundary weights.  ``l2_gram`` and ``h1_gram`` are the unweighted
    fixed-square norms used for all cross-amplitude distances.
    """

    fam: DiffeoFamily
    mesh: object
    rule: object
    stiffness: object
    mass: object
    boundary_mass: object
    l2_gram: object
    h1_gram: object


def build_operators(spec, epsilon, profile="graded"):
    """Assemble the operator bundle for one epsilon on the spec's mesh."""
    fam = DiffeoFamily(epsilon, profile)
    mesh = build_mesh(spec.nx, spec.ny)
    rule = oscillation_resolving_rule(fam, mesh)
    flat = DiffeoFamily(0.0, profile)
    flat_rule = oscillation_resolving_rule(flat, mesh)
    return Operators(
        fam=fam,
        mesh=mesh,
        rule=rule,
        stiffness=assemble_stiffness_adapted(fam, mesh, rule, spec.a),
        mass=assemble_mass(fam, mesh, rule),
        boundary_mass=assemble_boundary_mass(fam, mesh, rule),
        l2_gram=assemble_mass(flat, mesh, flat_rule),
        h1_gram=assemble_stiffness_adapted(flat, mesh, flat_rule, 1.0),
    )


def l2_norm(ops, u):
    """Unweighted discrete L2 norm on the fixed square."""
    return float(np.sqrt(max(ops.l2_gram.form_value(np.asarray(u)), 0.0)))


def h1_norm(ops, u):
    """Unweighted discrete H1 norm on the fixed square."""
    return float(np.sqrt(max(ops.h1_gram.form_value(np.asarray(u)), 0.0)))


def apply_interior_load(spec, fam, mesh, rule, u):
    """Load vector of the interior reaction term against every basis hat."""
    if isinstance(spec.f_kind, Zero):
        return np.zeros(mesh.n_nodes)
    return nonlinear_volume_load(fam, mesh, rule, u, spec.f_kind.value)


def apply_boundary_load(spec, fam, mesh, rule, u):
    """Load vector of the boundary reaction term; zero on interior nodes."""
    if isinstance(spec.g_kind, Zero):
        return np.zeros(mesh.n_nodes)
    return nonlinear_boundary_load(fam, mesh, rule, u, spec.g_kind.value)


def imex_step(spec, ops, u, dt):
    """One implicit-linear, explicit-reaction backward Euler step."""
    load = (apply_interior_load(spec, ops.fam, ops.mesh, ops.rule, u)
            + apply_boundary_load(spec, ops.fam, ops.mesh, ops.rule, u))
    rhs = ops.mass @ u + dt * load
    system = ops.mass + ops.stiffness.scaled(dt)
    x, _ = cg_solve(system, rhs, tol=spec.tolerances.linear, x0=np.asarray(u, dtype=float))
    return x


@lru_cache(maxsize=64)
def _energy_stiffness(fam, mesh, rule, a):
    return assemble_stiffness_adapted(fam, mesh, rule, a)


def lyapunov_value(spec, fam, mesh, rule, u):
    """Energy functional: quadratic part minus integrated reaction primitives.

    The quadratic form of the adapted stiffness already sums the gradient
    and (a/2)-mass pieces; the primitives are subtracted with the adapted
    volume and boundary weights.
    """
    u = np.asarray(u, dtype=float)
    total = 0.5 * _energy_stiffness(fam, mesh, rule, spec.a).form_value(u)
    if not isinstance(spec.f_kind, Zero):
        total -= nonlinear_volume_functional(fam, mesh, rule, u, spec.f_kind.primitive)
    if not isinstance(spec.g_kind, Zero):
        total -= nonlinear_boundary_functional(fam, mesh, rule, u, spec.g_kind.primitive)
    return float(total)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Recorded states of one evolution, energy and norms per step."""

    times: np.ndarray
    states: np.ndarray
    lyapunov: np.ndarray
    h1_norms: np.ndarray

    @property
    def final_state(self):
        return self.states[-1]

    def write_csv(self, path):
        """Dump columns t, V, min_u, max_u, h1_norm with full precision."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "V", "min_u", "max_u", "h1_norm"])
            for t, v, state, h1 in zip(self.times, self.lyapunov, self.states,
                                       self.h1_norms):
                writer.writerow([
                    f"{t:.17g}", f"{v:.17g}",
                    f"{state.min():.17g}", f"{state.max():.17g}", f"{h1:.17g}",
                ])


def evolve(spec, ops, u0, t_final=None):
    """March the IMEX scheme, recording the energy after every step.

    Stops with :class:`BlowupDetected` (carrying the partial trajectory)
    when the sup norm leaves the guard region, which signals either a
    non-dissipative configuration or a too-large time step.
    """
    dt = spec.dt
    horizon = spec.t_final if t_final is None else float(t_final)
    if horizon <= 0.0 or dt <= 0.0:
        raise ValueError(f"need positive dt and t_final, got dt={dt}, t_final={horizon}")
    n_steps = max(1, int(round(horizon / dt)))
    u = np.asarray(u0, dtype=float).copy()
    if u.shape != (ops.mesh.n_nodes,):
        raise ValueError(
            f"initial state has shape {u.shape}, mesh has {ops.mesh.n_nodes} nodes"
        )
    times = [0.0]
    states = [u.copy()]
    values = [lyapunov_value(spec, ops.fam, ops.mesh, ops.rule, u)]
    h1s = [h1_norm(ops, u)]

    def snapshot():
        return Trajectory(
            times=np.asarray(times), states=np.asarray(states),
            lyapunov=np.asarray(values), h1_norms=np.asarray(h1s),
        )

    if not np.all(np.isfinite(u)):
        raise ValueError("initial state has non-finite entries")
    for step in range(1, n_steps + 1):
        u = imex_step(spec, ops, u, dt)
        sup = float(np.max(np.abs(u))) if np.all(np.isfinite(u)) else np.inf
        if sup > BLOWUP_GUARD:
            raise BlowupDetected(
                f"sup norm {sup:.3e} exceeded guard {BLOWUP_GUARD:.0e} at t={step * dt:.4g}",
                trajectory=snapshot(),
            )
        times.append(step * dt)
        states.append(u.copy())
        values.append(lyapunov_value(spec, ops.fam, ops.mesh, ops.rule, u))
        h1s.append(h1_norm(ops, u))
    return snapshot()
