"""Deterministic sparse linear algebra: matvec wrapper, CG, MINRES, eigenpairs.

Everything here is written so that repeated runs, and runs under different
BLAS thread counts, produce bit-identical results.  The two rules that buy
this: inner products go through :func:`ddot`, which accumulates fixed-size
chunks in a fixed order at Python level, and matrix-vector products go
through scipy's serial CSR kernel.  No LAPACK/ARPACK calls appear on any
result path (dense routines are fine in tests as oracles).
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateDeflation, NotConverged

_CHUNK = 4096


def ddot(x, y):
    """Deterministic dot product: fixed-order chunked accumulation."""
    x = np.asarray(x)
    y = np.asarray(y)
    acc = 0.0
    for k in range(0, x.size, _CHUNK):
        acc += float(np.dot(x[k:k + _CHUNK], y[k:k + _CHUNK]))
    return acc


def dnorm(x):
    return math.sqrt(ddot(x, x))


class SparseOperator:
    """Square sparse matrix in CSR form with deterministic products.

    Thin wrapper: it pins the storage convention (sorted CSR, duplicates
    summed), provides the quadratic-form helper used all over the studies
    and the coordinate-format export.  Entry convention for assembled
    operators: ``(i, j)`` pairs test function i with trial function j.
    """

    def __init__(self, matrix):
        csr = sp.csr_matrix(matrix)
        csr.sum_duplicates()
        csr.sort_indices()
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"operator must be square, got {csr.shape}")
        self.csr = csr

    @property
    def n(self):
        return self.csr.shape[0]

    def matvec(self, x):
        return self.csr @ np.asarray(x)

    def __matmul__(self, x):
        if isinstance(x, SparseOperator):
            return SparseOperator(self.csr @ x.csr)
        return self.csr @ np.asarray(x)

    def form_value(self, u, v=None):
        """v^T (A u); with v omitted, the quadratic form u^T A u."""
        if v is None:
            v = u
        return ddot(v, self.csr @ np.asarray(u))

    def diagonal(self):
        return self.csr.diagonal()

    def toarray(self):
        return self.csr.toarray()

    def transpose(self):
        return SparseOperator(self.csr.T)

    def asymmetry(self):
        """max |A - A^T| entrywise; 0 for exactly symmetric operators."""
        d = (self.csr - self.csr.T).tocoo()
        return float(np.abs(d.data).max()) if d.nnz else 0.0

    def __add__(self, other):
        return SparseOperator(self.csr + other.csr)

    def __sub__(self, other):
        return SparseOperator(self.csr - other.csr)

    def scaled(self, alpha):
        return SparseOperator(alpha * self.csr)

    def export_coo(self, path):
        """Write 'row col value' lines (17 significant digits), sorted."""
        coo = self.csr.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# {self.n} {self.n} {coo.nnz}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v:.17g}\n")

    def __repr__(self):
        return f"SparseOperator(n={self.n}, nnz={self.csr.nnz})"


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool


def cg_solve(A, b, tol=1e-10, maxit=5000, x0=None):
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Stops when the true relative residual ||b - Ax|| / ||b|| drops to
    ``tol`` (recomputed, not the recurrence value).  Raises
    :class:`NotConverged` at ``maxit``, carrying the report and the last
    iterate; a nonpositive curvature p^T A p flags an indefinite matrix on
    the exception (``indefinite=True``) so callers can switch solvers or
    shifts.
    """
    b = np.asarray(b, dtype=float)
    bnorm = dnorm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True)
    diag = A.diagonal().copy()
    diag[diag <= 0.0] = 1.0
    inv_diag = 1.0 / diag
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A.matvec(x)
    z = inv_diag * r
    p = z.copy()
    rz = ddot(r, z)
    iterations = 0
    best, best_at = math.inf, 0
    for it in range(1, maxit + 1):
        iterations = it
        Ap = A.matvec(p)
        pAp = ddot(p, Ap)
        if pAp <= 0.0:
            rel = dnorm(b - A.matvec(x)) / bnorm
            raise NotConverged(
                f"nonpositive curvature at iteration {it}: matrix not positive definite",
                report=SolveReport(it, rel, False), x=x, indefinite=True,
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rn = dnorm(r)
        if rn < 0.999 * best:
            best, best_at = rn, it
        elif it - best_at > 200:
            # rounding floor reached: no progress in 200 iterations
            rel = dnorm(b - A.matvec(x)) / bnorm
            raise NotConverged(
                f"CG stalled at residual {rel:.3e} (tol {tol}); at its rounding floor",
                report=SolveReport(it, rel, False), x=x,
            )
        if rn <= tol * bnorm:
            # confirm against the recomputed residual before accepting
            true_r = b - A.matvec(x)
            true_rel = dnorm(true_r) / bnorm
            if true_rel <= tol:
                return x, SolveReport(it, true_rel, True)
            r = true_r
        z = inv_diag * r
        rz_new = ddot(r, z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    rel = dnorm(b - A.matvec(x)) / bnorm
    raise NotConverged(
        f"CG did not reach tol={tol} in {maxit} iterations (residual {rel:.3e})",
        report=SolveReport(iterations, rel, False), x=x,
    )


def minres_solve(A, b, tol=1e-10, maxit=10000, x0=None):
    """MINRES for symmetric (possibly indefinite) systems, deterministic.

    Lanczos recurrence with Givens rotations; no preconditioning.  Stops on
    the true relative residual like :func:`cg_solve` and raises
    :class:`NotConverged` at ``maxit``.
    """
    b = np.asarray(b, dtype=float)
    bnorm = dnorm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A.matvec(x) if x0 is not None else b.copy()
    beta = dnorm(r)
    if beta / bnorm <= tol:
        return x, SolveReport(0, beta / bnorm, True)
    v_prev = np.zeros_like(b)
    v = r / beta
    # Givens rotation state and search-direction recurrence
    c_old, s_old = 1.0, 0.0
    c, s = 1.0, 0.0
    d_old = np.zeros_like(b)
    d = np.zeros_like(b)
    eta = beta
    iterations = 0
    for it in range(1, maxit + 1):
        iterations = it
        w = A.matvec(v)
        alpha = ddot(v, w)
        w = w - alpha * v - beta * v_prev
        beta_new = dnorm(w)
        # apply previous rotations to the new tridiagonal column
        rho1 = c * alpha - c_old * s * beta
        rho2 = s * alpha + c_old * c * beta
        rho3 = s_old * beta
        # new rotation annihilating beta_new
        denom = math.hypot(rho1, beta_new)
        if denom == 0.0:
            break
        c_new, s_new = rho1 / denom, beta_new / denom
        d_new = (v - rho2 * d - rho3 * d_old) / denom
        x = x + (c_new * eta) * d_new
        eta = -s_new * eta
        d_old, d = d, d_new
        v_prev, v = v, (w / beta_new if beta_new > 0.0 else w)
        c_old, s_old = c, s
        c, s = c_new, s_new
        beta = beta_new
        if abs(eta) <= 0.5 * tol * bnorm or beta == 0.0:
            rel = dnorm(b - A.matvec(x)) / bnorm
            if rel <= tol:
                return x, SolveReport(it, rel, True)
    rel = dnorm(b - A.matvec(x)) / bnorm
    if rel <= tol:
        return x, SolveReport(iterations, rel, True)
    raise NotConverged(
        f"MINRES did not reach tol={tol} in {maxit} iterations (residual {rel:.3e})",
        report=SolveReport(iterations, rel, False), x=x,
    )


@dataclass
class EigenPair:
    value: float
    vector: np.ndarray


def _jacobi_eig(S, sweeps=60):
    """Eigendecomposition of a small dense symmetric matrix, ascending.

    Cyclic Jacobi rotations in fixed order: deterministic, no LAPACK.  Only
    ever used on k-by-k Rayleigh-Ritz blocks (k small).
    """
    S = np.array(S, dtype=float)
    n = S.shape[0]
    Q = np.eye(n)
    scale = max(1.0, float(np.abs(np.diag(S)).max()))
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off = max(off, abs(S[p, q]))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(S[p, q]) <= 1e-18 * scale:
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * S[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                S = rot.T @ S @ rot
                Q = Q @ rot
    vals = np.diag(S).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], Q[:, order]


def _small_cholesky(G):
    n = G.shape[0]
    L = np.zeros_like(G)
    for i in range(n):
        for j in range(i + 1):
            s = G[i, j] - float(np.dot(L[i, :j], L[j, :j]))
            if i == j:
                if s <= 0.0:
                    raise DegenerateDeflation("Rayleigh-Ritz Gram block not positive definite")
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return L


def _rayleigh_ritz(A, M, vectors):
    """Polish a set of approximate eigenvectors on their own span.

    Solves the k-by-k projected pencil exactly and rotates the basis, which
    removes within-span mixing left over from sequential deflation (the
    accuracy limit of vector j is otherwise set by the residuals of the
    vectors deflated before it).  Returns M-normalized vectors and Ritz
    values, ascending.
    """
    k = len(vectors)
    AX = [A.matvec(x) for x in vectors]
    MX = [M.matvec(x) for x in vectors]
    H = np.array([[ddot(vectors[i], AX[j]) for j in range(k)] for i in range(k)])
    G = np.array([[ddot(vectors[i], MX[j]) for j in range(k)] for i in range(k)])
    H = 0.5 * (H + H.T)
    G = 0.5 * (G + G.T)
    L = _small_cholesky(G)
    # Hs = L^-1 H L^-T by two small triangular solves
    Z = np.zeros_like(H)
    for col in range(k):
        y = H[:, col].copy()
        for i in range(k):
            y[i] = (y[i] - float(np.dot(L[i, :i], y[:i]))) / L[i, i]
        Z[:, col] = y
    Hs = np.zeros_like(H)
    for row in range(k):
        y = Z[row, :].copy()
        for i in range(k):
            y[i] = (y[i] - float(np.dot(L[i, :i], y[:i]))) / L[i, i]
        Hs[row, :] = y
    Hs = 0.5 * (Hs + Hs.T)
    vals, Q = _jacobi_eig(Hs)
    # Y = L^-T Q by back substitution
    Y = np.zeros_like(Q)
    for col in range(k):
        y = Q[:, col].copy()
        for i in range(k - 1, -1, -1):
            y[i] = (y[i] - float(np.dot(L[i + 1:, i], y[i + 1:]))) / L[i, i]
        Y[:, col] = y
    out = []
    for col in range(k):
        x = np.zeros_like(vectors[0])
        for j in range(k):
            x += Y[j, col] * vectors[j]
        x = x / _m_norm(x, M)
        out.append(EigenPair(float(vals[col]), _sign_normalize(x)))
    return out


def _sign_normalize(x):
    """Flip sign so the first component above noise level is positive."""
    scale = np.abs(x).max()
    if scale == 0.0:
        return x
    idx = np.flatnonzero(np.abs(x) > 1e-8 * scale)
    if idx.size and x[idx[0]] < 0.0:
        return -x
    return x


def smallest_eigenpairs(A, M, k, tol=1e-8, shift=0.0, maxit=400, seed=2026,
                        inner_tol_factor=0.01, inner_maxit=20000):
    """k smallest eigenpairs of A x = lambda M x by shift-invert iteration.

    Block version: subspace iteration on (A - shift*M)^(-1) M with one
    guard column and a Rayleigh-Ritz projection every sweep, so clustered
    or multiple eigenvalues converge together at the rate set by the gap to
    the first value outside the block (not by gaps inside a cluster).
    Inner solves are Jacobi CG at tol*factor, warm-started column by
    column; when CG reports its rounding floor the requested inner
    tolerance self-calibrates to what is attainable.

    Vectors come back M-orthonormal with a deterministic sign (first
    significant component positive), values ascending, and every returned
    pair satisfies ||A x - lambda M x|| <= 5*tol.

    Raises :class:`NotConverged` (with ``indefinite=True`` passed through
    from CG when A - shift*M is not positive definite; callers can then
    retry with a lower shift) and :class:`DegenerateDeflation` when the
    block collapses or k exceeds the space dimension.
    """
    n = A.n
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise DegenerateDeflation(f"requested {k} eigenpairs of an n={n} pencil")
    m = min(k + 1, n)
    S = A if shift == 0.0 else A - M.scaled(shift)
    rng = np.random.default_rng(seed)
    X = _m_gram_schmidt([rng.standard_normal(n) for _ in range(m)], M)
    warm = [None] * m
    cur_inner = tol * inner_tol_factor
    best = math.inf
    best_at = 0
    tightened = 0
    for sweep in range(1, maxit + 1):
        W = []
        for i in range(m):
            rhs = M.matvec(X[i])
            try:
                w, _ = cg_solve(S, rhs, tol=cur_inner, maxit=inner_maxit, x0=warm[i])
            except NotConverged as exc:
                if exc.indefinite or exc.x is None:
                    raise
                # rounding floor: take the iterate, stop over-demanding
                w = exc.x
                cur_inner = max(cur_inner, 2.0 * exc.report.residual)
            warm[i] = w
            W.append(w)
        pairs = _rayleigh_ritz(A, M, W)
        X = [p.vector for p in pairs]
        res = max(
            dnorm(A.matvec(p.vector) - p.value * M.matvec(p.vector))
            for p in pairs[:k]
        )
        if res <= 5.0 * tol:
            return pairs[:k]
        if res < 0.98 * best:
            best, best_at = res, sweep
        elif sweep - best_at >= 4:
            # no progress in four sweeps: tighten the inner solves; if that
            # has been tried and the floor persists, give up honestly
            if tightened >= 3:
                raise NotConverged(
                    f"eigen iteration stagnated at residual {res:.3e} "
                    f"(target {5.0 * tol:.1e}) after {sweep} sweeps"
                )
            cur_inner = max(cur_inner * 0.01, 1e-15)
            tightened += 1
            best_at = sweep
    raise NotConverged(
        f"eigen iteration did not converge in {maxit} sweeps (residual {res:.3e})"
    )


def pencil_smallest(A, M, k, tol=1e-8, shifts=(0.0, -1.0, -3.0, -7.0, -15.0, -31.0),
                    seed=2026):
    """Smallest eigenpairs of a possibly indefinite pencil (A, M).

    Walks a descending shift ladder until A - shift*M is positive definite,
    then runs :func:`smallest_eigenpairs`.  Indefiniteness is detected two
    ways: CG's curvature test during the inner solves, and a cheap upfront
    probe (the constant vector plus a few seeded random ones), which
    catches the realistic near-constant negative modes of Robin-type
    pencils before CG can luck its way through them.  A result whose
    smallest value lands at or below the shift is likewise rejected, since
    shift-invert only targets the smallest eigenvalue from strictly below.
    Linearizations at saddle equilibria land here.
    """
    last = None
    rng = np.random.default_rng(seed + 1)
    probes = [np.ones(A.n)] + [rng.standard_normal(A.n) for _ in range(3)]
    for sigma in shifts:
        S = A if sigma == 0.0 else A - M.scaled(sigma)
        if any(ddot(y, S.matvec(y)) <= 0.0 for y in probes):
            continue
        try:
            pairs = smallest_eigenpairs(A, M, k, tol=tol, shift=sigma, seed=seed)
        except NotConverged as exc:
            last = exc
            if not exc.indefinite:
                raise
            continue
        if pairs[0].value <= sigma + tol:
            last = NotConverged(
                f"shift {sigma} sits above the smallest eigenvalue {pairs[0].value}"
            )
            continue
        return pairs
    raise NotConverged(
        f"no shift in {shifts} made the pencil positive definite"
    ) from last


def _m_norm(x, M):
    val = ddot(x, M.matvec(x))
    if val <= 0.0:
        raise DegenerateDeflation("nonpositive M-norm; mass matrix not SPD on iterate")
    return math.sqrt(val)


def _m_gram_schmidt(vectors, M):
    """M-orthonormalize a list of vectors (two modified Gram-Schmidt passes)."""
    out = []
    for v in vectors:
        v = np.array(v, dtype=float)
        for _ in range(2):
            for u in out:
                v = v - ddot(u, M.matvec(v)) * u
        nrm = _m_norm(v, M)
        if nrm < 1e-12 * max(1.0, dnorm(v)):
            raise DegenerateDeflation("starting block collapsed under M-orthogonalization")
        out.append(v / nrm)
    return out
