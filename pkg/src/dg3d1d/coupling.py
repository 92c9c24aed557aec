"""Lateral averages of 3D fields on vessel surfaces and the 3D-1D exchange blocks."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError, OutOfDomainError
from .mesh3d import build_grid_index, locate_points
from .network1d import EdgeFrame, circle_points
from .spaces import interval_rule, lagrange_1d


@dataclass
class AverageOperator:
    """Rows are 1D Gauss points ordered (edge, interval, point).

    ``matrix`` maps 3D coefficients to circle averages, ``eval1d`` maps 1D
    coefficients to point values; ``weights`` are arclength quadrature weights.
    """
    matrix: sp.csr_matrix
    eval1d: sp.csr_matrix
    weights: np.ndarray
    edge: np.ndarray
    s: np.ndarray
    centers: np.ndarray
    circle: np.ndarray  # (nrows, M, 3) circle nodes, kept for exact averages

    def average_of(self, g):
        """Circle average of a callable 3D field at every row, same nodes as ``matrix``."""
        nrows, m, _ = self.circle.shape
        return np.asarray(g(self.circle.reshape(-1, 3))).reshape(nrows, m).mean(axis=1)


def gauss_points_1d(space1, npts=None):
    k = space1.degree
    rule = interval_rule(2 * (npts or k + 1) - 1)
    val, _ = lagrange_1d(k, rule.points)
    edge, s, x, w, rows_1d = [], [], [], [], []
    for e, m in enumerate(space1.meshes):
        se, xe = space1.points(e, rule.points)
        edge.append(np.full(se.size, e))
        s.append(se.ravel())
        x.append(xe.reshape(-1, 3))
        w.append(np.tile(m.h * rule.weights, m.num_cells))
        rows_1d.append(np.repeat(space1.interval_dofs(e), len(rule.weights), axis=0))
    return (np.concatenate(edge), np.concatenate(s), np.concatenate(x), np.concatenate(w),
            np.concatenate(rows_1d), np.tile(val, (len(np.concatenate(s)) // len(rule.weights), 1)))


def build_average_operator(mesh, space3, graph, space1, m=16, gauss_points=None, index=None):
    edge, s, centers, w, dofs1, vals1 = gauss_points_1d(space1, gauss_points)
    nrows = len(s)
    frames = [EdgeFrame.from_tangent(t) for t in graph.tangents]
    circle = np.empty((nrows, m, 3))
    for e in range(graph.num_edges):
        sel = np.flatnonzero(edge == e)
        if not len(sel):
            continue
        base, _ = circle_points(frames[e], np.zeros(3), graph.radius[e], m)
        circle[sel] = centers[sel, None, :] + base[None, :, :]

    pts = circle.reshape(-1, 3)
    tol = 1e-12 * mesh.h
    out = np.any((pts < mesh.lo - tol) | (pts > mesh.hi + tol), axis=1)
    if np.any(out):
        row = np.argmax(out) // m
        raise GeometryError(
            f"vessel cylinder leaves the box on edge {int(edge[row])} at s={s[row]:.6g}")
    index = index or build_grid_index(mesh)
    try:
        cells, bary = locate_points(mesh, pts, index)
    except OutOfDomainError as exc:
        raise GeometryError(str(exc)) from exc

    rows = np.repeat(np.arange(nrows), m * 4)
    cols = space3.cell_dofs(cells).ravel()
    Pi = sp.coo_matrix((bary.ravel() / m, (rows, cols)), shape=(nrows, space3.ndofs)).tocsr()
    Pi.sum_duplicates()
    nloc = dofs1.shape[1]
    E = sp.coo_matrix((vals1.ravel(), (np.repeat(np.arange(nrows), nloc), dofs1.ravel())),
                      shape=(nrows, space1.ndofs)).tocsr()
    return AverageOperator(Pi, E, w, edge, s, centers, circle)


@dataclass
class CouplingBlocks:
    omega_omega: sp.csr_matrix
    omega_lambda: sp.csr_matrix
    lambda_omega: sp.csr_matrix
    lambda_lambda: sp.csr_matrix

    def as_matrix(self):
        return sp.bmat([[self.omega_omega, self.omega_lambda],
                        [self.lambda_omega, self.lambda_lambda]], format="csr")


def coupling_weights(avg, graph):
    return avg.weights * graph.xi[avg.edge] * graph.perimeters[avg.edge]


def assemble_coupling(avg, graph):
    """Blocks of xi (avg u - u^, avg w - w^) in L^2_P over the vessels."""
    W = sp.diags(coupling_weights(avg, graph))
    Pi, E = avg.matrix, avg.eval1d
    PtW = Pi.T @ W
    EtW = E.T @ W
    return CouplingBlocks(
        omega_omega=(PtW @ Pi).tocsr(),
        omega_lambda=(-(PtW @ E)).tocsr(),
        lambda_omega=(-(EtW @ Pi)).tocsr(),
        lambda_lambda=(EtW @ E).tocsr(),
    )
