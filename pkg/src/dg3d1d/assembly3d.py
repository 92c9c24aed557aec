"""Interior-penalty forms on the 3D broken P1 space."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError
from .spaces import tet_rule, triangle_rule


@dataclass(frozen=True)
class IpdgParams:
    epsilon: int = -1
    sigma: float = 30.0
    sigma_floor: float = 10.0

    def __post_init__(self):
        if self.epsilon not in (-1, 0, 1):
            raise InvalidArgumentError(f"epsilon must be -1, 0 or 1, got {self.epsilon}")
        if self.sigma <= 0:
            raise InvalidArgumentError("penalty must be positive")
        if self.epsilon != 1 and self.sigma < self.sigma_floor:
            raise InvalidArgumentError(
                f"penalty {self.sigma} below coercivity floor {self.sigma_floor}")


def face_quadrature(vertices, tri, areas, rule=None):
    """Physical points (nf, nq, 3) and weights (nf, nq) on triangular faces."""
    rule = rule or triangle_rule(2)
    a, b, c = (vertices[tri[:, k]] for k in range(3))
    xi, eta = rule.points[:, 0], rule.points[:, 1]
    pts = (a[:, None] + xi[None, :, None] * (b - a)[:, None]
           + eta[None, :, None] * (c - a)[:, None])
    return pts, 2.0 * areas[:, None] * rule.weights[None, :]


def _bary_at(mesh, cells, pts):
    nf, nq, _ = pts.shape
    return mesh.barycentric(np.repeat(cells, nq), pts.reshape(-1, 3)).reshape(nf, nq, 4)


def _coo(rows, cols, vals, n):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def assemble_volume_3d(space):
    g = space.grads()
    K = space.mesh.volumes[:, None, None] * np.einsum("cid,cjd->cij", g, g)
    dofs = space.cell_dofs()
    rows = np.broadcast_to(dofs[:, :, None], K.shape)
    cols = np.broadcast_to(dofs[:, None, :], K.shape)
    return _coo(rows, cols, K, space.ndofs)


def _face_blocks(mesh, space, params, interior=True, terms=("consistency", "adjoint", "penalty")):
    """Local face matrices (nf, m, m) and their DOF lists (nf, m)."""
    if interior:
        tri, cells, nrm, area = (mesh.interior_faces, mesh.interior_cells,
                                 mesh.interior_normals, mesh.interior_areas)
    else:
        tri, nrm, area = mesh.boundary_faces, mesh.boundary_normals, mesh.boundary_areas
        cells = mesh.boundary_cells[:, None]
    pts, w = face_quadrature(mesh.vertices, tri, area)
    jumps, avg, dofs = [], [], []
    scale = 0.5 if interior else 1.0
    for side in range(cells.shape[1]):
        c = cells[:, side]
        sign = 1.0 if side == 0 else -1.0
        jumps.append(sign * _bary_at(mesh, c, pts))  # [v] = v1 - v2
        avg.append(scale * np.einsum("cid,cd->ci", space.grads(c), nrm))  # {grad v}.n
        dofs.append(space.cell_dofs(c))
    J = np.concatenate(jumps, axis=2)  # (nf, nq, m)
    G = np.concatenate(avg, axis=1)  # (nf, m)
    D = np.concatenate(dofs, axis=1)
    Jint = np.einsum("fq,fqi->fi", w, J)  # int_F [phi_i]
    B = np.zeros((len(tri), D.shape[1], D.shape[1]))
    if "consistency" in terms:
        B -= Jint[:, :, None] * G[:, None, :]  # - {grad u}.n [v]
    if "adjoint" in terms:
        B += params.epsilon * G[:, :, None] * Jint[:, None, :]  # eps {grad v}.n [u]
    if "penalty" in terms:
        pen = params.sigma / np.sqrt(area)
        B += pen[:, None, None] * np.einsum("fq,fqi,fqj->fij", w, J, J)
    return B, D


def assemble_a_h(mesh, space, params):
    """Sparse matrix of the interior-penalty form, rows = test, cols = trial."""
    A = assemble_volume_3d(space)
    for interior in (True, False):
        B, D = _face_blocks(mesh, space, params, interior)
        rows = np.broadcast_to(D[:, :, None], B.shape)
        cols = np.broadcast_to(D[:, None, :], B.shape)
        A = A + _coo(rows, cols, B, space.ndofs)
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_mass_3d(mesh, space):
    # exact P1 mass: |K|/20 (1 + delta_ij)
    local = (np.ones((4, 4)) + np.eye(4)) / 20.0
    M = mesh.volumes[:, None, None] * local[None]
    dofs = space.cell_dofs()
    rows = np.broadcast_to(dofs[:, :, None], M.shape)
    cols = np.broadcast_to(dofs[:, None, :], M.shape)
    return _coo(rows, cols, M, space.ndofs)


def assemble_load_3d(mesh, space, f, rule=None):
    """Vector of int_K f phi_i; ``f`` maps (n, 3) points to values."""
    rule = rule or tet_rule(5)
    pts, lam, w = space.quadrature_points(rule)
    fv = np.asarray(f(pts.reshape(-1, 3)), dtype=float).reshape(w.shape)
    return np.einsum("cq,qi->ci", fv * w, lam).ravel()


def dirichlet_rhs(mesh, space, params, g, rule=None):
    """Right-hand side of the weakly imposed boundary datum ``g`` on all of the box boundary."""
    rule = rule or triangle_rule(4)
    tri, cells = mesh.boundary_faces, mesh.boundary_cells
    nrm, area = mesh.boundary_normals, mesh.boundary_areas
    pts, w = face_quadrature(mesh.vertices, tri, area, rule)
    gv = np.asarray(g(pts.reshape(-1, 3)), dtype=float).reshape(w.shape)
    phi = _bary_at(mesh, cells, pts)
    dn = np.einsum("cid,cd->ci", space.grads(cells), nrm)
    gint = np.einsum("fq,fq->f", w, gv)
    pen = params.sigma / np.sqrt(area)
    local = (params.epsilon * gint[:, None] * dn
             + pen[:, None] * np.einsum("fq,fq,fqi->fi", w, gv, phi))
    rhs = np.zeros(space.ndofs)
    np.add.at(rhs, space.cell_dofs(cells).ravel(), local.ravel())
    return rhs


def face_penalty_block(mesh, space, params, face, interior=True):
    """Penalty-only local matrix of a single face (used for hand checks)."""
    B, D = _face_blocks(mesh, space, params, interior, terms=("penalty",))
    return B[face], D[face]


def dg_norm_3d_sq(mesh, space, params, coeffs):
    """Broken energy norm squared: gradient part plus scaled jumps (boundary included)."""
    g = space.grads()
    grad = np.einsum("cid,ci->cd", g, coeffs[space.cell_dofs()])
    total = float(np.sum(space.mesh.volumes * np.sum(grad**2, axis=1)))
    for interior in (True, False):
        B, D = _face_blocks(mesh, space, params, interior, terms=("penalty",))
        x = coeffs[D]
        total += float(np.einsum("fi,fij,fj->", x, B, x))
    return total
