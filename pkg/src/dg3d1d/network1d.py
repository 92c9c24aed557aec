"""Vessel graphs: straight edges with constant circular cross-sections."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidArgumentError


@dataclass
class VesselGraph:
    vertices: np.ndarray  # (nv, 3)
    edges: np.ndarray  # (ne, 2) [v_in, v_out]
    radius: np.ndarray  # (ne,)
    xi: np.ndarray  # (ne,) permeability, 0 switches the 3D exchange off
    cells: np.ndarray = None  # (ne,) preferred cell counts, optional
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.vertices.shape[1] == 2:
            self.vertices = np.column_stack([self.vertices, np.zeros(len(self.vertices))])
        self.edges = np.atleast_2d(np.asarray(self.edges, dtype=np.int64))
        ne = len(self.edges)
        self.radius = np.broadcast_to(np.asarray(self.radius, dtype=float), (ne,)).copy()
        self.xi = np.broadcast_to(np.asarray(self.xi, dtype=float), (ne,)).copy()
        if self.cells is not None:
            self.cells = np.broadcast_to(np.asarray(self.cells, dtype=np.int64), (ne,)).copy()
        self._validate()

    def _validate(self):
        nv = len(self.vertices)
        if np.any(self.edges < 0) or np.any(self.edges >= nv):
            raise InvalidArgumentError("edge references a missing vertex")
        if np.any(self.radius <= 0):
            raise InvalidArgumentError("radii must be positive")
        if np.any(self.xi < 0):
            raise InvalidArgumentError("permeability must be non-negative")
        if np.any(self.lengths <= 0):
            raise InvalidArgumentError(f"zero-length edge {int(np.argmin(self.lengths))}")
        ncomp, labels = self.components()
        if ncomp > 1:
            groups = [np.flatnonzero(labels == c).tolist() for c in range(ncomp)]
            raise InvalidArgumentError(f"graph is disconnected; components: {groups}")

    def components(self):
        nv = len(self.vertices)
        adj = coo_matrix((np.ones(len(self.edges)), (self.edges[:, 0], self.edges[:, 1])),
                         shape=(nv, nv))
        return connected_components(adj, directed=False)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    @property
    def tangents(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return d / self.lengths[:, None]

    @property
    def areas(self):
        return math.pi * self.radius**2

    @property
    def perimeters(self):
        return 2.0 * math.pi * self.radius

    @property
    def degree(self):
        return np.bincount(self.edges.ravel(), minlength=self.num_vertices)

    def incident(self, v):
        """Edges touching vertex ``v`` as ``(edge, sign)`` with sign = n_e(v)."""
        if "incident" not in self._cache:
            table = [[] for _ in range(self.num_vertices)]
            for e, (a, b) in enumerate(self.edges):
                table[a].append((e, 1))
                table[b].append((e, -1))
            self._cache["incident"] = table
        return list(self._cache["incident"][int(v)])

    def orientation(self, e, v):
        a, b = self.edges[e]
        return 1 if v == a else (-1 if v == b else 0)

    def check_area_bounds(self, a0, a1):
        s = self.areas + self.perimeters
        bad = np.flatnonzero((s < a0) | (s > a1))
        if len(bad):
            warnings.warn(f"A_e + P_e outside [{a0}, {a1}] on edges {bad.tolist()}", stacklevel=2)
        return bad


def classify_vertices(graph):
    """Split vertices into (boundary, bifurcation, pass-through) by degree."""
    deg = graph.degree
    return (np.flatnonzero(deg == 1), np.flatnonzero(deg >= 3), np.flatnonzero(deg == 2))


@dataclass
class EdgeMesh:
    edge: int
    nodes: np.ndarray  # arclength positions s_0 = 0 < ... < s_N = L

    @property
    def num_cells(self):
        return len(self.nodes) - 1

    @property
    def h(self):
        return self.nodes[1] - self.nodes[0]

    @property
    def length(self):
        return self.nodes[-1]


def build_edge_meshes(graph, cells_per_edge=None, h=None):
    """Uniform interval meshes, one per edge.

    A target size ``h`` gives ``ceil(L_e / h)`` cells; otherwise the explicit
    ``cells_per_edge`` (scalar or per edge) or the graph's own cell counts
    are used.
    """
    L = graph.lengths
    if h is not None:
        if h <= 0:
            raise InvalidArgumentError("target h must be positive")
        counts = np.ceil(L / h * (1 - 1e-12)).astype(int)
    elif cells_per_edge is not None:
        counts = np.broadcast_to(np.asarray(cells_per_edge, dtype=int), L.shape)
    elif graph.cells is not None:
        counts = graph.cells
    else:
        raise InvalidArgumentError("need a target h or cell counts per edge")
    counts = np.maximum(counts, 1)
    return [EdgeMesh(edge=e, nodes=np.linspace(0.0, L[e], int(counts[e]) + 1))
            for e in range(graph.num_edges)]


@dataclass
class EdgeFrame:
    tangent: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    @classmethod
    def from_tangent(cls, t):
        t = np.asarray(t, dtype=float)
        t = t / np.linalg.norm(t)
        helper = np.zeros(3)
        helper[np.argmin(np.abs(t))] = 1.0
        e1 = np.cross(t, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(t, e1)
        return cls(t, e1, e2)

    def rotated(self, angle):
        c, s = math.cos(angle), math.sin(angle)
        return EdgeFrame(self.tangent, c * self.e1 + s * self.e2, -s * self.e1 + c * self.e2)


def circle_points(frame, center, radius, m=16):
    """Trapezoid nodes on the circle of the given radius around ``center``.

    Angles are offset by half a step so that for axis-aligned vessels no node
    falls on the coordinate planes through the centreline. Returns the points
    and the uniform weights ``2 pi R / m``.
    """
    if m < 4 or m % 2:
        raise InvalidArgumentError("circle quadrature needs an even count >= 4")
    theta = 2.0 * math.pi * (np.arange(m) + 0.5) / m
    pts = (np.asarray(center, dtype=float)[None, :]
           + radius * (np.cos(theta)[:, None] * frame.e1 + np.sin(theta)[:, None] * frame.e2))
    return pts, np.full(m, 2.0 * math.pi * radius / m)


def circle_average(g, frame, center, radius, m=16):
    pts, w = circle_points(frame, center, radius, m)
    return float(np.dot(w, g(pts)) / w.sum())
