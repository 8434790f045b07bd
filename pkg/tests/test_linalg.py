"""Solvers and eigensolvers against dense oracles, plus determinism."""

import math

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from oscsquare.assembly import assemble_mass, assemble_stiffness_adapted
from oscsquare.errors import DegenerateDeflation, NotConverged
from oscsquare.geometry import DiffeoFamily
from oscsquare.linalg import (
    SparseOperator,
    cg_solve,
    ddot,
    dnorm,
    minres_solve,
    pencil_smallest,
    smallest_eigenpairs,
)
from oscsquare.mesh import QuadratureRule, build_mesh

IDENT = DiffeoFamily(0.0)
R1 = QuadratureRule(1)


def _random_spd(n, seed):
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((n, n))
    return R @ R.T + n * np.eye(n)


def test_ddot_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(10_001)
    y = rng.standard_normal(10_001)
    assert abs(ddot(x, y) - float(np.dot(x, y))) < 1e-9 * dnorm(x) * dnorm(y)


def test_cg_identity_one_iteration():
    A = SparseOperator(sp.identity(40, format="csr"))
    b = np.linspace(-1, 1, 40)
    x, rep = cg_solve(A, b, tol=1e-12)
    assert rep.iterations == 1 and rep.converged
    assert np.abs(x - b).max() < 1e-14


def test_cg_constant_solution():
    # (A + M) u = M 1 with A the eps=0 adapted operator, a=0.5:
    # the constant 1/(a+1) solves it exactly
    mesh = build_mesh(16, 16)
    A = assemble_stiffness_adapted(IDENT, mesh, R1, a=0.5)
    M = assemble_mass(IDENT, mesh, R1)
    x, rep = cg_solve(A + M, M.matvec(np.ones(mesh.n_nodes)), tol=1e-12)
    assert rep.converged and rep.residual <= 1e-12
    assert np.abs(x - 1.0 / 1.5).max() < 1e-10


def test_cg_matches_dense_oracle():
    n = 50
    A_dense = _random_spd(n, 5)
    b = np.random.default_rng(6).standard_normal(n)
    x, rep = cg_solve(SparseOperator(sp.csr_matrix(A_dense)), b, tol=1e-12, maxit=2000)
    assert rep.converged
    oracle = scipy.linalg.solve(A_dense, b, assume_a="pos")
    assert np.abs(x - oracle).max() < 1e-9


def test_cg_flags_indefinite():
    A = SparseOperator(sp.diags([1.0, -1.0, 2.0, 3.0]).tocsr())
    with pytest.raises(NotConverged) as err:
        cg_solve(A, np.ones(4), tol=1e-12)
    assert err.value.indefinite


def test_cg_raises_on_maxit_with_report():
    A = SparseOperator(sp.csr_matrix(_random_spd(60, 7) + np.diag(np.logspace(0, 9, 60))))
    b = np.ones(60)
    with pytest.raises(NotConverged) as err:
        cg_solve(A, b, tol=1e-14, maxit=2)
    assert err.value.report.iterations == 2
    assert not err.value.report.converged
    assert err.value.x is not None


def test_cg_deterministic_bits():
    mesh = build_mesh(24, 24)
    A = assemble_stiffness_adapted(IDENT, mesh, R1, a=0.5)
    b = np.sin(np.arange(mesh.n_nodes) * 0.37)
    x1, _ = cg_solve(A, b, tol=1e-11)
    x2, _ = cg_solve(A, b, tol=1e-11)
    assert np.array_equal(x1, x2)


def test_minres_spd_and_indefinite():
    n = 40
    A_dense = _random_spd(n, 11)
    b = np.random.default_rng(12).standard_normal(n)
    x, rep = minres_solve(SparseOperator(sp.csr_matrix(A_dense)), b, tol=1e-12, maxit=4000)
    assert rep.converged
    assert np.abs(x - scipy.linalg.solve(A_dense, b)).max() < 1e-8
    # indefinite but nonsingular diagonal system
    d = np.concatenate([np.linspace(1, 3, 20), -np.linspace(1, 2, 20)])
    D = SparseOperator(sp.diags(d).tocsr())
    x, rep = minres_solve(D, b, tol=1e-12, maxit=4000)
    assert rep.converged
    assert np.abs(x - b / d).max() < 1e-9
    # zero right-hand side short-circuits
    x, rep = minres_solve(D, np.zeros(n), tol=1e-12)
    assert rep.iterations == 0 and np.all(x == 0.0)


def test_eigenpairs_square_spectrum():
    # Neumann spectrum of the square shifted by a: {a, a+pi^2, a+pi^2, a+2pi^2}
    mesh = build_mesh(64, 64)
    A = assemble_stiffness_adapted(IDENT, mesh, R1, a=0.5)
    M = assemble_mass(IDENT, mesh, R1)
    pairs = smallest_eigenpairs(A, M, k=4, tol=1e-8)
    got = [p.value for p in pairs]
    pi2 = math.pi**2
    expect = [0.5, 0.5 + pi2, 0.5 + pi2, 0.5 + 2 * pi2]
    for g, e in zip(got, expect):
        assert abs(g - e) / e < 0.01
    # ground state is the constant
    x0 = pairs[0].vector
    dev = x0 - np.full_like(x0, x0.mean())
    assert math.sqrt(M.form_value(dev)) < 1e-6
    # residual property and M-orthonormality
    for p in pairs:
        assert dnorm(A.matvec(p.vector) - p.value * M.matvec(p.vector)) < 10.0 * 1e-8
        assert abs(M.form_value(p.vector) - 1.0) < 1e-8
    for i in range(4):
        for j in range(i + 1, 4):
            assert abs(ddot(pairs[i].vector, M.matvec(pairs[j].vector))) < 1e-8


def test_eigenpairs_match_dense_oracle():
    mesh = build_mesh(10, 7)  # nx != ny avoids exact degeneracy
    fam = DiffeoFamily(0.1, "graded")
    from oscsquare.mesh import oscillation_resolving_rule

    rule = oscillation_resolving_rule(fam, mesh)
    A = assemble_stiffness_adapted(fam, mesh, rule, a=0.5)
    M = assemble_mass(fam, mesh, rule)
    pairs = smallest_eigenpairs(A, M, k=3, tol=1e-9)
    oracle = scipy.linalg.eigh(A.toarray(), M.toarray(), eigvals_only=True)[:3]
    for p, o in zip(pairs, oracle):
        assert abs(p.value - o) < 1e-7 * (1.0 + abs(o))


def test_eigenpairs_deterministic():
    mesh = build_mesh(12, 12)
    A = assemble_stiffness_adapted(IDENT, mesh, R1, a=0.5)
    M = assemble_mass(IDENT, mesh, R1)
    a1 = smallest_eigenpairs(A, M, k=2, tol=1e-9)
    a2 = smallest_eigenpairs(A, M, k=2, tol=1e-9)
    assert a1[0].value == a2[0].value and a1[1].value == a2[1].value
    assert np.array_equal(a1[1].vector, a2[1].vector)


def test_pencil_ladder_handles_indefinite():
    # K + aM - 2M has smallest eigenvalue a - 2 < 0; the zero shift is
    # invalid and the ladder must walk down before converging
    mesh = build_mesh(12, 12)
    A = assemble_stiffness_adapted(IDENT, mesh, R1, a=0.5)
    M = assemble_mass(IDENT, mesh, R1)
    L = A - M.scaled(2.0)
    pairs = pencil_smallest(L, M, k=2, tol=1e-9)
    oracle = scipy.linalg.eigh(L.toarray(), M.toarray(), eigvals_only=True)[:2]
    assert abs(pairs[0].value - (-1.5)) < 1e-6
    for p, o in zip(pairs, oracle):
        assert abs(p.value - o) < 1e-6


def test_deflation_exhaustion_raises():
    M = SparseOperator(sp.identity(3, format="csr"))
    A = SparseOperator(sp.diags([1.0, 2.0, 3.0]).tocsr())
    with pytest.raises(DegenerateDeflation):
        smallest_eigenpairs(A, M, k=3, tol=1e-10)
        smallest_eigenpairs(A, M, k=5, tol=1e-10)


def test_sparse_operator_algebra():
    A = SparseOperator(sp.diags([1.0, 2.0]).tocsr())
    B = SparseOperator(sp.diags([3.0, 4.0]).tocsr())
    assert np.allclose((A + B).diagonal(), [4.0, 6.0])
    assert np.allclose((B - A).diagonal(), [2.0, 2.0])
    assert np.allclose(A.scaled(2.0).diagonal(), [2.0, 4.0])
    assert (A @ B).toarray()[0, 0] == 3.0
    with pytest.raises(ValueError):
        SparseOperator(sp.csr_matrix(np.ones((2, 3))))