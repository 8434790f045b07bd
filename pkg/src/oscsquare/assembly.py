"""Q1 assembly of the adapted-metric, canonical-metric and limit operators.

All volume forms reduce to one workhorse that integrates

    sum over keys  c_key(x) * D_test(phi_i) * D_trial(phi_j)

with per-key coefficient fields evaluated at quadrature points.  Keys name
(trial, test) derivative slots: ``"xx"`` pairs d/dx1 with d/dx1, ``"y0"``
pairs trial d/dx2 with the plain test value, ``"00"`` is a weighted mass
term, and so on.  Entry (i, j) of every operator pairs test function i with
trial function j.

Determinism: element contributions come from a fixed-order einsum and are
merged by scipy's COO-to-CSR duplicate summation, which is index-sorted and
independent of threading.
"""

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyOverflow
from .geometry import boundary_jacobian, inv_transpose_jacobian, jacobian_det
from .linalg import SparseOperator
from .mesh import DEFAULT_POINT_CAP, global_quadrature

# ---------------------------------------------------------------------------
# Reference Q1 basis on [0,1]^2, corner order [SW, SE, NE, NW]
# ---------------------------------------------------------------------------


def _shape_values(xi, eta):
    return np.stack([
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ])


def _shape_grads(xi, eta):
    d_xi = np.stack([-(1.0 - eta), (1.0 - eta), eta, -eta])
    d_eta = np.stack([-(1.0 - xi), -xi, xi, (1.0 - xi)])
    return d_xi, d_eta


def _quadrature_data(mesh, rule):
    """Physical points, weights and basis tables shared by all elements."""
    total = mesh.n_elements * rule.points_per_element
    if total > DEFAULT_POINT_CAP:
        raise AssemblyOverflow(
            f"assembly would evaluate {total} quadrature points "
            f"(cap {DEFAULT_POINT_CAP}); coarsen the mesh or raise epsilon"
        )
    xi, eta, _ = rule.reference_points()
    x1, x2, w = global_quadrature(mesh, rule)
    N = _shape_values(xi, eta)
    d_xi, d_eta = _shape_grads(xi, eta)
    dNdx = d_xi / mesh.hx
    dNdy = d_eta / mesh.hy
    return x1, x2, w, {"0": N, "x": dNdx, "y": dNdy}


def _assemble_volume(mesh, rule, coefficient_fn):
    """Assemble sum_key int c_key * D_trial(phi_j) * D_test(phi_i) dx.

    ``coefficient_fn(x1, x2)`` maps quadrature-point arrays to a dict whose
    keys are two-character strings "<trial><test>" over {x, y, 0} and whose
    values broadcast against the point arrays.
    """
    x1, x2, w, tables = _quadrature_data(mesh, rule)
    coeffs = coefficient_fn(x1, x2)
    local = np.zeros((mesh.n_elements, 4, 4))
    for key, c in coeffs.items():
        trial, test = tables[key[0]], tables[key[1]]
        weighted = np.broadcast_to(np.asarray(c), x1.shape) * w
        local += np.einsum("eq,iq,jq->eij", weighted, test, trial)
    rows = np.repeat(mesh.elements, 4, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 4)).ravel()
    n = mesh.n_nodes
    return SparseOperator(sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)))


# ---------------------------------------------------------------------------
# Volume operators
# ---------------------------------------------------------------------------


def assemble_stiffness_adapted(fam, mesh, rule, a):
    """Adapted-metric elliptic operator: (B grad u).(B grad v)|J| + a u v |J|.

    With B upper triangular (b11=1, b21=0) the integrand expands to
    ux vx + b12 (uy vx + ux vy) + (b12^2 + b22^2) uy vy, all times det J.
    Symmetric positive definite for a > 0.
    """
    if a <= 0.0:
        raise ValueError(f"zero-order coefficient must be positive, got a={a}")

    def coefficients(x1, x2):
        det = jacobian_det(fam, (x1, x2))
        B = inv_transpose_jacobian(fam, (x1, x2))
        return {
            "xx": det * np.ones_like(x1),
            "yx": det * B.b12,
            "xy": det * B.b12,
            "yy": det * (B.b12**2 + B.b22**2),
            "00": a * det * np.ones_like(x1),
        }

    return _assemble_volume(mesh, rule, coefficients)


def assemble_mass(fam, mesh, rule):
    """Weighted mass: entry (i,j) = int phi_j phi_i |J| dx."""

    def coefficients(x1, x2):
        return {"00": jacobian_det(fam, (x1, x2)) * np.ones_like(x1)}

    return _assemble_volume(mesh, rule, coefficients)


def assemble_stiffness_plain(mesh, rule, a=0.0):
    """Unweighted form on the flat square: grad u . grad v + a u v.

    Unlike the adapted assembler this allows a = 0 (it never backs a
    linear solve); the wrong-limit study compares against it directly.
    """

    def coefficients(x1, x2):
        one = np.ones_like(x1)
        out = {"xx": one, "yy": one}
        if a != 0.0:
            out["00"] = a * one
        return out

    return _assemble_volume(mesh, rule, coefficients)


def assemble_stiffness_canonical(eps, mesh, rule, a):
    """Canonical-metric pullback operator for the linear profile family.

    Seven blocks: the x1-x1 Laplacian piece; two oscillatory cross terms
    pairing ux2 with test-x1 and ux1 with test-x2; two x2-x2 pieces; and two
    first-order terms pairing ux1 (resp. ux2) with the plain test value.
    Plus a times the unweighted mass.  Not symmetric: the first-order
    blocks have no transpose partners.
    """
    if eps <= 0.0:
        raise ValueError(f"canonical operator needs eps > 0, got {eps}")

    def coefficients(x1, x2):
        s = np.sin(x1 / eps)
        c = np.cos(x1 / eps)
        den = 1.0 + eps * s
        cross = -x2 * c / den
        return {
            "xx": np.ones_like(x1),
            "yx": cross,
            "xy": cross,
            "yy": (x2**2 * c**2 + 1.0) / den**2,
            "x0": -c / den,
            "y0": x2 * c**2 / den**2,
            "00": a * np.ones_like(x1),
        }

    return _assemble_volume(mesh, rule, coefficients)


def assemble_limit_anomalous(mesh, rule, a):
    """The canonical pullback's actual limit: (-Laplacian + a) plus
    (1/2) x2^2 on the x2-x2 block and a first-order (1/2) x2 d/dx2 term.

    Intentionally nonsymmetric (the first-order block has no partner);
    target operator of the wrong-limit study.
    """

    def coefficients(x1, x2):
        out = {
            "xx": np.ones_like(x1),
            "yy": 1.0 + 0.5 * x2**2,
            "y0": 0.5 * x2,
        }
        if a != 0.0:
            out["00"] = a * np.ones_like(x1)
        return out

    return _assemble_volume(mesh, rule, coefficients)


# ---------------------------------------------------------------------------
# Boundary operators and loads
# ---------------------------------------------------------------------------


def _edge_quadrature(mesh, rule, tag):
    """1D quadrature along one boundary side.

    Returns (edge node pairs, s-coordinates (n_edges, m), weights including
    edge length and trace shape values (2, m)).  The same x1-panel count as
    the volume rule resolves the oscillatory top-edge weight.
    """
    g, gw = np.polynomial.legendre.leggauss(rule.gauss_order)
    t01 = 0.5 * (g + 1.0)
    w01 = 0.5 * gw
    p = rule.panels_per_element
    t = ((np.arange(p)[:, None] + t01[None, :]) / p).ravel()
    wt = np.tile(w01 / p, p)
    edges = mesh.boundary_edges[tag]
    h = mesh.hx if tag in ("I1", "I3") else mesh.hy
    coord = 0 if tag in ("I1", "I3") else 1
    start = mesh.nodes[edges[:, 0], coord]
    s = start[:, None] + h * t[None, :]
    w = np.broadcast_to(h * wt[None, :], s.shape)
    trace = np.stack([1.0 - t, t])
    return edges, s, w, trace


def assemble_boundary_mass(fam, mesh, rule, sides=("I1", "I2", "I3", "I4")):
    """Boundary mass: entry (i,j) = int over the boundary of
    phi_j phi_i w dsigma with w the side-dependent arc-length weight.

    Only boundary-node couplings are nonzero.  ``sides`` restricts the
    integral to a subset of edges (used to probe single-side values).
    """
    n = mesh.n_nodes
    rows, cols, vals = [], [], []
    for tag in sides:
        edges, s, w, trace = _edge_quadrature(mesh, rule, tag)
        weight = np.broadcast_to(boundary_jacobian(fam, tag, s), s.shape) * w
        local = np.einsum("eq,iq,jq->eij", weight, trace, trace)
        rows.append(np.repeat(edges, 2, axis=1).ravel())
        cols.append(np.tile(edges, (1, 2)).ravel())
        vals.append(local.ravel())
    coo = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return SparseOperator(coo)


def q1_interpolate(mesh, func):
    """Nodal coefficient vector of the Q1 interpolant of func(x1, x2)."""
    return np.asarray(func(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)


def interpolate_at_quadrature(mesh, rule, u):
    """Values of the Q1 field u at all volume quadrature points, (n_el, m)."""
    xi, eta, _ = rule.reference_points()
    N = _shape_values(xi, eta)
    return np.einsum("iq,ei->eq", N, np.asarray(u)[mesh.elements])


def weighted_volume_load(fam, mesh, rule, values_fn):
    """Load vector int values_fn(x) phi_i |J| dx."""

    def integrand(u_vals, x1, x2):
        return values_fn(x1, x2)

    return nonlinear_volume_load(fam, mesh, rule, None, integrand, pointwise=True)


def nonlinear_volume_load(fam, mesh, rule, u, f, pointwise=False):
    """Load vector int f(u_h) phi_i |J| dx for a nodal field u.

    With ``pointwise=True``, ``f(None, x1, x2)`` is used directly as the
    integrand field (no interpolation), which covers fixed right-hand
    sides.
    """
    x1, x2, w, tables = _quadrature_data(mesh, rule)
    det = jacobian_det(fam, (x1, x2))
    det = np.broadcast_to(det, x1.shape) if np.ndim(det) else np.full_like(x1, det)
    if pointwise:
        vals = np.broadcast_to(np.asarray(f(None, x1, x2)), x1.shape)
    else:
        vals = f(interpolate_at_quadrature(mesh, rule, u))
    local = np.einsum("eq,iq->ei", vals * det * w, tables["0"])
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.elements, local)
    return out


def nonlinear_volume_jacobian(fam, mesh, rule, u, fprime):
    """Matrix with entries int fprime(u_h) phi_j phi_i |J| dx.

    The derivative block of the interior reaction term, a mass matrix
    weighted by the state-dependent coefficient fprime(u_h).
    """
    x1, x2, w, tables = _quadrature_data(mesh, rule)
    det = jacobian_det(fam, (x1, x2))
    c = np.broadcast_to(fprime(interpolate_at_quadrature(mesh, rule, u)), x1.shape)
    local = np.einsum("eq,iq,jq->eij", c * det * w, tables["0"], tables["0"])
    rows = np.repeat(mesh.elements, 4, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 4)).ravel()
    n = mesh.n_nodes
    return SparseOperator(sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)))


def nonlinear_boundary_jacobian(fam, mesh, rule, u, gprime):
    """Matrix with entries int gprime(u_h) phi_j phi_i w dsigma over all sides."""
    u = np.asarray(u)
    n = mesh.n_nodes
    rows, cols, vals = [], [], []
    for tag in ("I1", "I2", "I3", "I4"):
        edges, s, w, trace = _edge_quadrature(mesh, rule, tag)
        weight = np.broadcast_to(boundary_jacobian(fam, tag, s), s.shape) * w
        uvals = np.einsum("iq,ei->eq", trace, u[edges])
        local = np.einsum("eq,iq,jq->eij", gprime(uvals) * weight, trace, trace)
        rows.append(np.repeat(edges, 2, axis=1).ravel())
        cols.append(np.tile(edges, (1, 2)).ravel())
        vals.append(local.ravel())
    coo = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return SparseOperator(coo)


def nonlinear_volume_functional(fam, mesh, rule, u, F):
    """Scalar int F(u_h) |J| dx."""
    x1, x2, w, _ = _quadrature_data(mesh, rule)
    det = jacobian_det(fam, (x1, x2))
    vals = F(interpolate_at_quadrature(mesh, rule, u))
    return float(np.sum(vals * det * w))


def nonlinear_boundary_load(fam, mesh, rule, u, g):
    """Load vector int g(u_h) phi_i w dsigma over all four sides."""
    u = np.asarray(u)
    out = np.zeros(mesh.n_nodes)
    for tag in ("I1", "I2", "I3", "I4"):
        edges, s, w, trace = _edge_quadrature(mesh, rule, tag)
        weight = np.broadcast_to(boundary_jacobian(fam, tag, s), s.shape) * w
        uvals = np.einsum("iq,ei->eq", trace, u[edges])
        local = np.einsum("eq,iq->ei", g(uvals) * weight, trace)
        np.add.at(out, edges, local)
    return out


def nonlinear_boundary_functional(fam, mesh, rule, u, G):
    """Scalar int G(u_h) w dsigma over all four sides."""
    u = np.asarray(u)
    total = 0.0
    for tag in ("I1", "I2", "I3", "I4"):
        edges, s, w, trace = _edge_quadrature(mesh, rule, tag)
        weight = np.broadcast_to(boundary_jacobian(fam, tag, s), s.shape) * w
        uvals = np.einsum("iq,ei->eq", trace, u[edges])
        total += float(np.sum(G(uvals) * weight))
    return total
