"""Structured Q1 mesh of the unit square plus oscillation-resolving quadrature.

The mesh never bends: all oscillatory geometry enters through coefficient
functions evaluated at quadrature points, so the degrees of freedom stay
independent of the perturbation wavelength.  What has to resolve the
oscillation is the quadrature, hence :func:`oscillation_resolving_rule`,
which subdivides each element in the x1 direction until a Gauss panel spans
at most an eighth of one sin(x1/eps) period.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidMeshSize, QuadratureBudgetExceeded

#: Boundary tags in mesh order: top, right, bottom, left.
BOUNDARY_TAGS = ("I1", "I2", "I3", "I4")

# Hard ceiling on total quadrature points per assembly; exceeding it means
# the requested eps is too small for the mesh/budget combination.
DEFAULT_POINT_CAP = 4_000_000


class StructuredMesh:
    """Uniform nx-by-ny quadrilateral grid of [0,1]^2 with Q1 nodes.

    Node ids are row-major: ``id = j*(nx+1) + i`` for lattice position
    (i, j).  Element ``e = ey*nx + ex`` lists its corners counterclockwise
    as [SW, SE, NE, NW].  Boundary edges are grouped by side tag; each edge
    stores its two node ids ordered along the side's parameter (x1 on the
    top and bottom, x2 on the left and right).

    Instances are immutable after construction and hash by identity, which
    makes them usable as cache keys for assembled operators.
    """

    def __init__(self, nx, ny):
        if not (isinstance(nx, (int, np.integer)) and isinstance(ny, (int, np.integer))):
            raise InvalidMeshSize(f"mesh sizes must be integers, got {nx!r}, {ny!r}")
        if nx < 2 or ny < 2:
            raise InvalidMeshSize(f"need nx, ny >= 2, got nx={nx}, ny={ny}")
        self.nx = int(nx)
        self.ny = int(ny)
        self.hx = 1.0 / self.nx
        self.hy = 1.0 / self.ny
        xs = np.linspace(0.0, 1.0, self.nx + 1)
        ys = np.linspace(0.0, 1.0, self.ny + 1)
        X, Y = np.meshgrid(xs, ys)
        self.nodes = np.column_stack([X.ravel(), Y.ravel()])
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        sw = (jj * (self.nx + 1) + ii).ravel()
        self.elements = np.column_stack(
            [sw, sw + 1, sw + self.nx + 2, sw + self.nx + 1]
        )
        i = np.arange(self.nx)
        j = np.arange(self.ny)
        top = self.ny * (self.nx + 1)
        self.boundary_edges = {
            "I1": np.column_stack([top + i, top + i + 1]),
            "I2": np.column_stack([j * (self.nx + 1) + self.nx,
                                   (j + 1) * (self.nx + 1) + self.nx]),
            "I3": np.column_stack([i, i + 1]),
            "I4": np.column_stack([j * (self.nx + 1), (j + 1) * (self.nx + 1)]),
        }
        mask = np.zeros((self.ny + 1, self.nx + 1), dtype=bool)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
        self.boundary_nodes = np.flatnonzero(mask.ravel())

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self):
        return self.nx * self.ny

    def element_origins(self):
        """(n_elements, 2) array of SW-corner coordinates."""
        return self.nodes[self.elements[:, 0]]

    def __repr__(self):
        return f"StructuredMesh(nx={self.nx}, ny={self.ny})"


def build_mesh(nx, ny):
    """Construct the structured mesh; raises InvalidMeshSize below 2x2."""
    return StructuredMesh(nx, ny)


@dataclass(frozen=True)
class QuadratureRule:
    """Per-element Gauss rule: x1-panels times a tensor Gauss grid.

    Each element splits into ``panels_per_element`` equal strips in the x1
    direction; each strip carries a gauss_order x gauss_order tensor rule.
    Exact on bivariate polynomials of degree <= 2*gauss_order - 1.
    """

    panels_per_element: int
    gauss_order: int = 3

    def __post_init__(self):
        if self.panels_per_element < 1:
            raise ValueError("panels_per_element must be >= 1")
        if self.gauss_order < 2:
            raise ValueError("gauss_order must be >= 2")

    def reference_points(self):
        """Quadrature nodes and weights on the reference square [0,1]^2.

        Returns (xi, eta, w) flat arrays; the weights sum to 1.
        """
        g, gw = np.polynomial.legendre.leggauss(self.gauss_order)
        g01 = 0.5 * (g + 1.0)
        w01 = 0.5 * gw
        p = self.panels_per_element
        xi = ((np.arange(p)[:, None] + g01[None, :]) / p).ravel()
        wxi = np.tile(w01 / p, p)
        xi2, eta = np.meshgrid(xi, g01, indexing="ij")
        w2 = wxi[:, None] * w01[None, :]
        return xi2.ravel(), eta.ravel(), w2.ravel()

    @property
    def points_per_element(self):
        return self.panels_per_element * self.gauss_order**2


def oscillation_resolving_rule(fam, mesh, max_points=DEFAULT_POINT_CAP):
    """Pick x1-panels so each Gauss panel spans at most pi*eps/4 in x1.

    That is eight panels per sin(x1/eps) period.  The identity family needs
    no subdivision.  Raises QuadratureBudgetExceeded when the total point
    count would pass ``max_points``.
    """
    if fam.epsilon == 0.0:
        return QuadratureRule(panels_per_element=1, gauss_order=3)
    panels = max(1, math.ceil(mesh.hx / (math.pi * fam.epsilon / 4.0)))
    rule = QuadratureRule(panels_per_element=panels, gauss_order=3)
    total = mesh.n_elements * rule.points_per_element
    if total > max_points:
        raise QuadratureBudgetExceeded(
            f"epsilon={fam.epsilon} on a {mesh.nx}x{mesh.ny} mesh needs {total} "
            f"quadrature points, above the {max_points} cap"
        )
    return rule


def global_quadrature(mesh, rule):
    """All physical quadrature points and weights, element by element.

    Returns (x1, x2, w) arrays of shape (n_elements, points_per_element);
    ``w`` already includes the element area, so sums integrate over the
    square.
    """
    xi, eta, w = rule.reference_points()
    origins = mesh.element_origins()
    x1 = origins[:, 0:1] + mesh.hx * xi[None, :]
    x2 = origins[:, 1:2] + mesh.hy * eta[None, :]
    ww = np.broadcast_to((mesh.hx * mesh.hy) * w[None, :], x1.shape)
    return x1, x2, ww


def integrate(mesh, rule, f):
    """Integrate a callable f(x1, x2) over the unit square with the rule."""
    x1, x2, w = global_quadrature(mesh, rule)
    return float(np.sum(np.asarray(f(x1, x2)) * w))
