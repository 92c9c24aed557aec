"""Quadrature rules, reference bases and DOF layouts for the broken spaces."""

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import roots_jacobi

from .errors import InvalidArgumentError, QuadratureError


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray  # reference coordinates
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def interval_rule(degree):
    """Gauss-Legendre on [0, 1]."""
    n = max(1, math.ceil((degree + 1) / 2))
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule(0.5 * (x + 1.0), 0.5 * w, 2 * n - 1)


def _gauss_jacobi01(n, alpha):
    # nodes/weights on [0, 1] for the weight (1 - x)^alpha
    x, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed (Duffy) Gauss rule on the reference triangle (0,0),(1,0),(0,1)."""
    n = max(1, math.ceil((degree + 1) / 2))
    a, wa = _gauss_jacobi01(n, 1.0)
    b, wb = _gauss_jacobi01(n, 0.0)
    pts, wts = [], []
    for (ai, wai), (bj, wbj) in product(zip(a, wa), zip(b, wb)):
        pts.append((ai, bj * (1 - ai)))
        wts.append(wai * wbj)
    return QuadRule(np.array(pts), np.array(wts), 2 * n - 1)


@lru_cache(maxsize=None)
def tet_rule(degree):
    """Collapsed Gauss rule on the reference tetrahedron."""
    n = max(1, math.ceil((degree + 1) / 2))
    a, wa = _gauss_jacobi01(n, 2.0)
    b, wb = _gauss_jacobi01(n, 1.0)
    c, wc = _gauss_jacobi01(n, 0.0)
    pts, wts = [], []
    for (ai, wai), (bj, wbj), (ck, wck) in product(zip(a, wa), zip(b, wb), zip(c, wc)):
        y = bj * (1 - ai)
        z = ck * (1 - ai - y)
        pts.append((ai, y, z))
        wts.append(wai * wbj * wck)
    return QuadRule(np.array(pts), np.array(wts), 2 * n - 1)


def _simplex_monomial_integral(powers):
    # int over the reference simplex of prod x_i^p_i = prod p_i! / (d + sum p)!
    d = len(powers)
    return math.prod(math.factorial(p) for p in powers) / math.factorial(d + sum(powers))


def check_rule(rule, dim):
    """Raise QuadratureError unless every monomial up to ``rule.degree`` is exact."""
    for powers in product(range(rule.degree + 1), repeat=dim):
        if sum(powers) > rule.degree:
            continue
        if dim == 1:
            exact = 1.0 / (powers[0] + 1)
        else:
            exact = _simplex_monomial_integral(powers)
        pts = rule.points.reshape(len(rule.weights), dim)
        approx = np.dot(rule.weights, np.prod(pts ** np.array(powers), axis=1))
        if abs(approx - exact) > 1e-13 * max(1.0, abs(exact)):
            raise QuadratureError(f"rule of degree {rule.degree} fails on x^{powers}")
    if np.any(rule.weights <= 0):
        raise QuadratureError("non-positive quadrature weight")


def quad_rules(k2=1):
    """The rule set used by assembly and error evaluation, self-checked."""
    rules = {
        "tet": tet_rule(2),
        "tet_error": tet_rule(5),
        "triangle": triangle_rule(2),
        "triangle_data": triangle_rule(4),
        "interval": interval_rule(2 * k2),
    }
    for name, rule in rules.items():
        dim = {"tet": 3, "tri": 2, "int": 1}[name[:3]]
        check_rule(rule, dim)
    return rules


class DgSpace3:
    """Broken P1 on a tetrahedral mesh; cell c owns DOFs 4c..4c+3.

    The local basis is the barycentric coordinate of the cell's vertices, so
    DOF values are nodal values at the (duplicated) cell vertices.
    """

    degree = 1
    dofs_per_cell = 4

    def __init__(self, mesh):
        self.mesh = mesh

    @property
    def ndofs(self):
        return 4 * self.mesh.num_cells

    def cell_dofs(self, cells=None):
        cells = np.arange(self.mesh.num_cells) if cells is None else np.asarray(cells)
        return 4 * cells[..., None] + np.arange(4)

    def grads(self, cells=None):
        """(nc, 4, 3) constant basis gradients."""
        Jinv = self.mesh.inverse_jacobians
        if cells is not None:
            Jinv = Jinv[cells]
        g = np.empty(Jinv.shape[:1] + (4, 3))
        g[:, 1:, :] = Jinv
        g[:, 0, :] = -Jinv.sum(axis=1)
        return g

    def eval_basis(self, cell, p):
        """Values and gradients of the four basis functions of ``cell`` at ``p``."""
        lam = self.mesh.barycentric([cell], np.asarray(p, dtype=float)[None, :])[0]
        return lam, self.grads([cell])[0]

    def interpolate(self, g):
        """Nodal interpolant: per-cell vertex values of the callable ``g``."""
        return np.asarray(g(self.mesh.cell_coords.reshape(-1, 3)), dtype=float)

    def evaluate(self, coeffs, cells, bary):
        return np.einsum("ni,ni->n", coeffs[self.cell_dofs(cells)], bary)

    def quadrature_points(self, rule):
        """Physical points (nc, nq, 3), basis values (nq, 4) and weights (nc, nq)."""
        X = self.mesh.cell_coords
        ref = rule.points
        lam = np.column_stack([1.0 - ref.sum(axis=1), ref])
        pts = np.einsum("qi,cid->cqd", lam, X)
        w = 6.0 * self.mesh.volumes[:, None] * rule.weights[None, :]
        return pts, lam, w


def lagrange_1d(k, x):
    """Equispaced Lagrange basis on [0, 1]: values and derivatives, shape (len(x), k+1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if k == 1:
        val = np.column_stack([1 - x, x])
        der = np.column_stack([-np.ones_like(x), np.ones_like(x)])
    elif k == 2:
        val = np.column_stack([2 * (x - 0.5) * (x - 1), -4 * x * (x - 1), 2 * x * (x - 0.5)])
        der = np.column_stack([4 * x - 3, -8 * x + 4, 4 * x - 1])
    else:
        raise InvalidArgumentError(f"1D degree must be 1 or 2, got {k}")
    return val, der


class DgSpace1:
    """Broken P_k on every edge mesh, blocks ordered edge by edge then interval."""

    def __init__(self, graph, meshes, degree=1):
        if degree not in (1, 2):
            raise InvalidArgumentError(f"1D degree must be 1 or 2, got {degree}")
        self.graph = graph
        self.meshes = meshes
        self.degree = degree
        self.nloc = degree + 1
        counts = np.array([m.num_cells for m in meshes])
        self.offsets = np.concatenate([[0], np.cumsum(counts * self.nloc)])

    @property
    def ndofs(self):
        return int(self.offsets[-1])

    def interval_dofs(self, e, i=None):
        m = self.meshes[e]
        i = np.arange(m.num_cells) if i is None else np.asarray(i)
        return self.offsets[e] + self.nloc * i[..., None] + np.arange(self.nloc)

    def endpoint(self, e, sign):
        """DOFs, values and s-derivatives of the basis at the edge end with n_e(v)=sign."""
        m = self.meshes[e]
        if sign > 0:
            dofs = self.interval_dofs(e, 0)
            val, der = lagrange_1d(self.degree, 0.0)
        else:
            dofs = self.interval_dofs(e, m.num_cells - 1)
            val, der = lagrange_1d(self.degree, 1.0)
        return dofs, val[0], der[0] / m.h

    def points(self, e, xref):
        """Physical coordinates of reference points ``xref`` in every interval of edge e."""
        m = self.meshes[e]
        s = m.nodes[:-1, None] + m.h * np.asarray(xref)[None, :]
        a = self.graph.vertices[self.graph.edges[e, 0]]
        return s, a + s[..., None] * self.graph.tangents[e]

    def interpolate(self, g):
        """Nodal interpolant of ``g(edge, s, x)`` evaluated at Lagrange nodes."""
        out = np.zeros(self.ndofs)
        xref = np.linspace(0.0, 1.0, self.nloc)
        for e in range(len(self.meshes)):
            s, x = self.points(e, xref)
            out[self.interval_dofs(e).ravel()] = np.asarray(g(e, s.ravel(), x.reshape(-1, 3))).ravel()
        return out
