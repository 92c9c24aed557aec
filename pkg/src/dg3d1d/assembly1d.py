"""Weighted interior-penalty forms on vessel edges and the junction (hybrid) terms.

Junction vertices carry one scalar unknown each; these multiplier DOFs are
numbered after all edge DOFs in the matrices returned here.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError
from .network1d import classify_vertices
from .spaces import interval_rule, lagrange_1d


@dataclass(frozen=True)
class Ipdg1Params:
    epsilon: int = -1
    sigma: float = 30.0  # interior nodes of an edge
    sigma_v: float = 10.0  # junction and boundary-vertex penalty

    def __post_init__(self):
        if self.epsilon not in (-1, 0, 1):
            raise InvalidArgumentError(f"epsilon must be -1, 0 or 1, got {self.epsilon}")
        if self.sigma <= 0 or self.sigma_v <= 0:
            raise InvalidArgumentError("penalties must be positive")

    def check_vertex_penalty(self, graph):
        floor = 4.0 * float(graph.areas.max())
        if self.sigma_v < floor:
            warnings.warn(f"sigma_v={self.sigma_v} below suggested floor {floor:.3g}", stacklevel=2)
            return False
        return True


class MultiplierSpace:
    """One unknown per junction vertex (bifurcations and degree-2 vertices)."""

    def __init__(self, graph):
        _, bif, passthrough = classify_vertices(graph)
        self.vertices = np.sort(np.concatenate([bif, passthrough]))
        self.index = {int(v): k for k, v in enumerate(self.vertices)}

    @property
    def ndofs(self):
        return len(self.vertices)


def _coo(rows, cols, vals, n):
    return sp.coo_matrix((np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=(n, n)).tocsr()


def assemble_a_lambda(graph, meshes, space1, params):
    """Per-edge form: A-weighted gradients plus interior-node flux and penalty terms."""
    k = space1.degree
    rule = interval_rule(2 * k)
    val, der = lagrange_1d(k, rule.points)
    ref_stiff = np.einsum("q,qi,qj->ij", rule.weights, der, der)
    v0, d0 = (a[0] for a in lagrange_1d(k, 0.0))
    v1, d1 = (a[0] for a in lagrange_1d(k, 1.0))

    rows, cols, vals = [], [], []
    for e, m in enumerate(meshes):
        A = graph.areas[e]
        h = m.h
        dofs = space1.interval_dofs(e)  # (N, nloc)
        blk = np.broadcast_to(A / h * ref_stiff, (m.num_cells,) + ref_stiff.shape)
        rows.append(np.broadcast_to(dofs[:, :, None], blk.shape))
        cols.append(np.broadcast_to(dofs[:, None, :], blk.shape))
        vals.append(blk)
        if m.num_cells < 2:
            continue
        # node s_i between interval i-1 (left) and i (right)
        jump = np.concatenate([v1, -v0])
        avg = 0.5 * A * np.concatenate([d1, d0]) / h
        local = (-np.outer(jump, avg) + params.epsilon * np.outer(avg, jump)
                 + params.sigma / h * np.outer(jump, jump))
        nd = np.concatenate([dofs[:-1], dofs[1:]], axis=1)  # (N-1, 2 nloc)
        blk = np.broadcast_to(local, (len(nd),) + local.shape)
        rows.append(np.broadcast_to(nd[:, :, None], blk.shape))
        cols.append(np.broadcast_to(nd[:, None, :], blk.shape))
        vals.append(blk)
    n = space1.ndofs
    return _coo(np.concatenate([r.ravel() for r in rows]),
                np.concatenate([c.ravel() for c in cols]),
                np.concatenate([v.ravel() for v in vals]), n)


def _vertex_terms(graph, space1, params, v):
    """(dofs, value row, A n d_s row, h) for every edge end at vertex v."""
    out = []
    for e, sign in graph.incident(v):
        dofs, val, der = space1.endpoint(e, sign)
        out.append((dofs, val, graph.areas[e] * sign * der, space1.meshes[e].h))
    return out


def assemble_b_v(graph, meshes, space1, multipliers, params):
    """Junction form over [edge DOFs, multiplier DOFs], square of size n1 + nm."""
    n1 = space1.ndofs
    rows, cols, vals = [], [], []
    for v in multipliers.vertices:
        mdof = n1 + multipliers.index[int(v)]
        for dofs, val, flux, h in _vertex_terms(graph, space1, params, v):
            idx = np.concatenate([dofs, [mdof]])
            jump = np.concatenate([val, [-1.0]])  # u_e(v) - u~_v
            fl = np.concatenate([flux, [0.0]])  # A d_s u_e(v) n_e(v)
            local = (np.outer(jump, fl) - params.epsilon * np.outer(fl, jump)
                     + params.sigma_v / h * np.outer(jump, jump))
            rows.append(np.repeat(idx, len(idx)))
            cols.append(np.tile(idx, len(idx)))
            vals.append(local.ravel())
    n = n1 + multipliers.ndofs
    if not rows:
        return sp.csr_matrix((n, n))
    return _coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n)


def assemble_vertex_dirichlet(graph, space1, params, vertices):
    """Matrix part of weak Dirichlet conditions at the given boundary vertices."""
    rows, cols, vals = [], [], []
    for v in vertices:
        for dofs, val, flux, h in _vertex_terms(graph, space1, params, v):
            local = (np.outer(val, flux) - params.epsilon * np.outer(flux, val)
                     + params.sigma_v / h * np.outer(val, val))
            rows.append(np.repeat(dofs, len(dofs)))
            cols.append(np.tile(dofs, len(dofs)))
            vals.append(local.ravel())
    n = space1.ndofs
    if not rows:
        return sp.csr_matrix((n, n))
    return _coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n)


def dirichlet_vertex_rhs(graph, space1, params, values):
    """Right-hand side for weak vertex data ``values = {vertex: g}``."""
    rhs = np.zeros(space1.ndofs)
    for v, g in values.items():
        for dofs, val, flux, h in _vertex_terms(graph, space1, params, v):
            rhs[dofs] += g * (-params.epsilon * flux + params.sigma_v / h * val)
    return rhs


def _interval_quadrature(space1, e, rule):
    m = space1.meshes[e]
    s, x = space1.points(e, rule.points)
    return s, x, m.h * rule.weights


def assemble_mass_1d(graph, meshes, space1):
    k = space1.degree
    rule = interval_rule(2 * k)
    val, _ = lagrange_1d(k, rule.points)
    ref = np.einsum("q,qi,qj->ij", rule.weights, val, val)
    rows, cols, vals = [], [], []
    for e, m in enumerate(meshes):
        dofs = space1.interval_dofs(e)
        blk = np.broadcast_to(graph.areas[e] * m.h * ref, (m.num_cells,) + ref.shape)
        rows.append(np.broadcast_to(dofs[:, :, None], blk.shape).ravel())
        cols.append(np.broadcast_to(dofs[:, None, :], blk.shape).ravel())
        vals.append(blk.ravel())
    return _coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), space1.ndofs)


def assemble_load_1d(graph, meshes, space1, f_hat, degree=None):
    """A-weighted load; ``f_hat(edge, s, x)`` is vectorized over points."""
    k = space1.degree
    rule = interval_rule(degree if degree is not None else 2 * k + 4)
    val, _ = lagrange_1d(k, rule.points)
    rhs = np.zeros(space1.ndofs)
    for e, m in enumerate(meshes):
        s, x, w = _interval_quadrature(space1, e, rule)
        fv = np.asarray(f_hat(e, s.ravel(), x.reshape(-1, 3)), dtype=float).reshape(s.shape)
        local = graph.areas[e] * np.einsum("nq,q,qi->ni", fv, w, val)
        rhs[space1.interval_dofs(e).ravel()] += local.ravel()
    return rhs
