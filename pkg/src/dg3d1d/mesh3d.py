"""Structured tetrahedral meshes of an axis-aligned box.

Each of the ``n**3`` sub-cubes is cut into six tetrahedra sharing the main
diagonal (Kuhn split), so neighbouring cubes match face to face and the mesh
is conforming.
"""

from dataclasses import dataclass, field
from itertools import permutations, product

import numpy as np

from .errors import InvalidArgumentError, MeshInvalidError, OutOfDomainError

BARY_TOL = 1e-12

# vertex opposite to local face f is local vertex f
_LOCAL_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@dataclass
class Mesh3:
    vertices: np.ndarray  # (nv, 3)
    cells: np.ndarray  # (nc, 4), positively oriented
    lo: np.ndarray = None
    hi: np.ndarray = None
    # face data, filled by build_face_connectivity
    interior_faces: np.ndarray = None  # (nf, 3) vertex ids
    interior_cells: np.ndarray = None  # (nf, 2) [K1, K2], K1 < K2
    interior_normals: np.ndarray = None  # (nf, 3) unit, K1 -> K2
    interior_areas: np.ndarray = None
    boundary_faces: np.ndarray = None
    boundary_cells: np.ndarray = None  # (nb,)
    boundary_normals: np.ndarray = None  # outward
    boundary_areas: np.ndarray = None
    _geom: dict = field(default_factory=dict, repr=False)

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def cell_coords(self):
        """(nc, 4, 3) vertex coordinates per cell."""
        if "coords" not in self._geom:
            self._geom["coords"] = self.vertices[self.cells]
        return self._geom["coords"]

    @property
    def jacobians(self):
        """(nc, 3, 3) affine maps; column j is X_{j+1} - X_0."""
        if "jac" not in self._geom:
            X = self.cell_coords
            self._geom["jac"] = np.transpose(X[:, 1:] - X[:, :1], (0, 2, 1))
        return self._geom["jac"]

    @property
    def inverse_jacobians(self):
        if "jinv" not in self._geom:
            self._geom["jinv"] = np.linalg.inv(self.jacobians)
        return self._geom["jinv"]

    @property
    def volumes(self):
        if "vol" not in self._geom:
            self._geom["vol"] = np.linalg.det(self.jacobians) / 6.0
        return self._geom["vol"]

    @property
    def centroids(self):
        return self.cell_coords.mean(axis=1)

    @property
    def cell_diameters(self):
        if "diam" not in self._geom:
            X = self.cell_coords
            d = [np.linalg.norm(X[:, i] - X[:, j], axis=1)
                 for i in range(4) for j in range(i + 1, 4)]
            self._geom["diam"] = np.max(d, axis=0)
        return self._geom["diam"]

    @property
    def h(self):
        return float(self.cell_diameters.max())

    def barycentric(self, cell_ids, points):
        """Barycentric coordinates of ``points[i]`` with respect to ``cell_ids[i]``."""
        cell_ids = np.asarray(cell_ids)
        points = np.atleast_2d(points)
        X0 = self.cell_coords[cell_ids, 0]
        lam = np.einsum("nij,nj->ni", self.inverse_jacobians[cell_ids], points - X0)
        return np.column_stack([1.0 - lam.sum(axis=1), lam])


def build_box_mesh(n, lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)):
    """Kuhn-split box mesh with ``6 n^3`` cells and ``(n+1)^3`` vertices."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"subdivisions must be a positive integer, got {n!r}")
    n = int(n)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
        raise InvalidArgumentError(f"degenerate box lo={lo.tolist()} hi={hi.tolist()}")

    axes = [np.linspace(lo[d], hi[d], n + 1) for d in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    I, J, K = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    tets = []
    for perm in permutations(range(3)):
        corner = np.zeros(3, dtype=int)
        path = [corner.copy()]
        for axis in perm:
            corner[axis] += 1
            path.append(corner.copy())
        tets.append(np.column_stack([vid(I + c[0], J + c[1], K + c[2]) for c in path]))
    # cube-major ordering: the six tets of one cube are consecutive
    cells = np.stack(tets, axis=1).reshape(-1, 4)

    mesh = Mesh3(vertices=vertices, cells=_orient(vertices, cells), lo=lo, hi=hi)
    return build_face_connectivity(mesh)


def mesh_from_cells(vertices, cells):
    """Wrap arbitrary tetrahedra (e.g. a single reference tet) as a Mesh3."""
    vertices = np.asarray(vertices, dtype=float)
    cells = _orient(vertices, np.asarray(cells, dtype=np.int64))
    mesh = Mesh3(vertices=vertices, cells=cells,
                 lo=vertices.min(axis=0), hi=vertices.max(axis=0))
    return build_face_connectivity(mesh)


def _orient(vertices, cells):
    cells = cells.copy()
    X = vertices[cells]
    det = np.linalg.det(np.transpose(X[:, 1:] - X[:, :1], (0, 2, 1)))
    if np.any(np.abs(det) < 1e-300):
        raise MeshInvalidError("degenerate tetrahedron")
    neg = det < 0
    cells[neg, 2], cells[neg, 3] = cells[neg, 3].copy(), cells[neg, 2].copy()
    return cells


def build_face_connectivity(mesh):
    """Classify faces and attach normals, areas and neighbouring cells."""
    cells = mesh.cells
    nc = len(cells)
    nv = len(mesh.vertices)
    local = cells[:, _LOCAL_FACES]  # (nc, 4, 3)
    tri = np.sort(local.reshape(-1, 3), axis=1)
    key = (tri[:, 0] * nv + tri[:, 1]) * nv + tri[:, 2]
    owner = np.repeat(np.arange(nc), 4)
    opposite = cells.reshape(-1)  # local face f is opposite local vertex f

    order = np.argsort(key, kind="stable")
    key_s = key[order]
    uniq, start, counts = np.unique(key_s, return_index=True, return_counts=True)
    if np.any(counts > 2):
        raise MeshInvalidError(f"{int(np.sum(counts > 2))} faces shared by more than two cells")

    first = order[start]
    inner = counts == 2
    i1 = first[inner]
    i2 = order[start[inner] + 1]
    # stable argsort keeps the lower cell index first
    k1, k2 = owner[i1], owner[i2]
    swap = k1 > k2
    i1[swap], i2[swap] = i2[swap], i1[swap].copy()

    V = mesh.vertices
    mesh.interior_faces = tri[i1]
    mesh.interior_cells = np.column_stack([owner[i1], owner[i2]])
    mesh.interior_normals, mesh.interior_areas = _face_geometry(V, tri[i1], V[opposite[i1]])

    ib = first[~inner]
    mesh.boundary_faces = tri[ib]
    mesh.boundary_cells = owner[ib]
    mesh.boundary_normals, mesh.boundary_areas = _face_geometry(V, tri[ib], V[opposite[ib]])
    return mesh


def _face_geometry(V, tri, away_from):
    a, b, c = V[tri[:, 0]], V[tri[:, 1]], V[tri[:, 2]]
    cr = np.cross(b - a, c - a)
    norm = np.linalg.norm(cr, axis=1)
    nrm = cr / norm[:, None]
    flip = np.einsum("ij,ij->i", nrm, a - away_from) < 0
    nrm[flip] *= -1
    return nrm, 0.5 * norm


@dataclass
class PointLocation:
    cell: int
    barycentric: np.ndarray


@dataclass
class GridIndex:
    """Uniform bins over the box; each bin lists the cells whose bounding box meets it."""
    lo: np.ndarray
    bin_size: np.ndarray
    shape: tuple
    offsets: np.ndarray  # CSR row pointer over flattened bins
    cell_ids: np.ndarray  # sorted ascending within each bin


def build_grid_index(mesh, bin_size=None):
    lo = np.asarray(mesh.lo, dtype=float)
    hi = np.asarray(mesh.hi, dtype=float)
    if bin_size is None:
        # bin size about the edge length of a structured sub-cube
        bin_size = mesh.h / np.sqrt(3.0)
    shape = tuple(int(s) for s in np.maximum(1, np.round((hi - lo) / bin_size)))
    size = (hi - lo) / np.array(shape)

    X = mesh.cell_coords
    pad = BARY_TOL * mesh.h
    bmin = np.floor((X.min(axis=1) - pad - lo) / size).astype(int)
    bmax = np.floor((X.max(axis=1) + pad - lo) / size).astype(int)
    bmin = np.clip(bmin, 0, np.array(shape) - 1)
    bmax = np.clip(bmax, 0, np.array(shape) - 1)
    span = (bmax - bmin).max(axis=0) + 1

    pairs_bin, pairs_cell = [], []
    cell_ids = np.arange(len(X))
    for off in product(*(range(s) for s in span)):
        b = bmin + np.array(off)
        ok = np.all(b <= bmax, axis=1)
        flat = np.ravel_multi_index(b[ok].T, shape)
        pairs_bin.append(flat)
        pairs_cell.append(cell_ids[ok])
    pb = np.concatenate(pairs_bin)
    pc = np.concatenate(pairs_cell)
    order = np.lexsort((pc, pb))
    pb, pc = pb[order], pc[order]
    offsets = np.zeros(np.prod(shape) + 1, dtype=np.int64)
    np.add.at(offsets, pb + 1, 1)
    return GridIndex(lo=lo, bin_size=size, shape=shape,
                     offsets=np.cumsum(offsets), cell_ids=pc)


def locate_points(mesh, points, index=None):
    """Vectorized point location.

    Returns ``(cells, bary)``. Among all cells containing a point (up to
    ``BARY_TOL``), the one with the lowest index is chosen.
    """
    if index is None:
        index = build_grid_index(mesh)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tol = BARY_TOL * mesh.h
    outside = np.any((pts < mesh.lo - tol) | (pts > mesh.hi + tol), axis=1)
    if np.any(outside):
        bad = pts[np.argmax(outside)]
        raise OutOfDomainError(f"point {bad.tolist()} lies outside the box")

    shape = np.array(index.shape)
    b = np.clip(np.floor((pts - index.lo) / index.bin_size).astype(int), 0, shape - 1)
    flat = np.ravel_multi_index(b.T, index.shape)
    start = index.offsets[flat]
    count = index.offsets[flat + 1] - start
    width = int(count.max())
    slot = np.arange(width)
    valid = slot[None, :] < count[:, None]
    cand = np.where(valid, index.cell_ids[np.minimum(start[:, None] + slot, len(index.cell_ids) - 1)], 0)

    npts = len(pts)
    rep_pts = np.repeat(pts, width, axis=0)
    bary = mesh.barycentric(cand.ravel(), rep_pts).reshape(npts, width, 4)
    inside = valid & (bary.min(axis=2) >= -BARY_TOL)
    if not np.all(inside.any(axis=1)):
        bad = pts[np.argmin(inside.any(axis=1))]
        raise OutOfDomainError(f"no cell contains point {bad.tolist()}")
    pick = np.argmax(inside, axis=1)  # first hit = lowest cell index
    rows = np.arange(npts)
    return cand[rows, pick], bary[rows, pick]


def locate_point(mesh, p, index=None):
    cells, bary = locate_points(mesh, np.asarray(p, dtype=float)[None, :], index)
    return PointLocation(cell=int(cells[0]), barycentric=bary[0])
