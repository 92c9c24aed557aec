"""Global block system for coupled box/vessel problems.

Unknowns are stacked as ``[3D DOFs | edge DOFs | junction multipliers]``.
Either the box mesh or the graph may be absent (pure 3D or pure network runs).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly1d import (Ipdg1Params, MultiplierSpace, assemble_a_lambda, assemble_b_v,
                         assemble_load_1d, assemble_mass_1d, assemble_vertex_dirichlet,
                         dirichlet_vertex_rhs)
from .assembly3d import (IpdgParams, assemble_a_h, assemble_load_3d, assemble_mass_3d,
                         dirichlet_rhs)
from .coupling import assemble_coupling, build_average_operator
from .linalg import block_compose, cg_solve
from .network1d import build_edge_meshes, classify_vertices
from .spaces import DgSpace1, DgSpace3
from .verify import conservation_residuals


@dataclass
class Solution:
    u3d: np.ndarray
    u1d: np.ndarray
    multipliers: np.ndarray
    report: object = None
    conservation: float = 0.0  # largest junction balance residual
    residual_norm: float = 0.0  # absolute ||b - Ax||

    @property
    def vector(self):
        return np.concatenate([self.u3d, self.u1d, self.multipliers])


@dataclass
class CoupledProblem:
    mesh: object = None
    graph: object = None
    edge_meshes: list = None
    k2: int = 1
    ipdg3: IpdgParams = field(default_factory=IpdgParams)
    ipdg1: Ipdg1Params = field(default_factory=Ipdg1Params)
    circle_points: int = 16
    gauss_points: int = None
    dirichlet_vertices: tuple = None  # default: every degree-1 vertex is Neumann

    def __post_init__(self):
        self.space3 = DgSpace3(self.mesh) if self.mesh is not None else None
        if self.graph is not None:
            if self.edge_meshes is None:
                self.edge_meshes = build_edge_meshes(self.graph)
            self.space1 = DgSpace1(self.graph, self.edge_meshes, self.k2)
            self.multipliers = MultiplierSpace(self.graph)
            self.ipdg1.check_vertex_penalty(self.graph)
        else:
            self.space1 = None
            self.multipliers = None
        self.dirichlet_vertices = tuple(int(v) for v in (
            () if self.dirichlet_vertices is None else self.dirichlet_vertices))
        if self.graph is not None:
            boundary, _, _ = classify_vertices(self.graph)
            extra = set(self.dirichlet_vertices) - set(boundary.tolist())
            if extra:
                raise ValueError(f"Dirichlet data only allowed on degree-1 vertices, got {sorted(extra)}")
        self.average = None
        if self.mesh is not None and self.graph is not None:
            self.average = build_average_operator(self.mesh, self.space3, self.graph, self.space1,
                                                  self.circle_points, self.gauss_points)
        self._ops = {}

    @property
    def sizes(self):
        return (self.space3.ndofs if self.space3 else 0,
                self.space1.ndofs if self.space1 else 0,
                self.multipliers.ndofs if self.multipliers else 0)

    @property
    def ndofs(self):
        return sum(self.sizes)

    def split(self, x):
        n3, n1, _ = self.sizes
        return x[:n3], x[n3:n3 + n1], x[n3 + n1:]

    def blocks(self):
        if "blocks" in self._ops:
            return self._ops["blocks"]
        out = {}
        if self.mesh is not None:
            out["a_h"] = assemble_a_h(self.mesh, self.space3, self.ipdg3)
        if self.graph is not None:
            out["a_lambda"] = assemble_a_lambda(self.graph, self.edge_meshes, self.space1, self.ipdg1)
            out["dirichlet_1d"] = assemble_vertex_dirichlet(self.graph, self.space1, self.ipdg1,
                                                            self.dirichlet_vertices)
            out["b_v"] = assemble_b_v(self.graph, self.edge_meshes, self.space1,
                                      self.multipliers, self.ipdg1)
        if self.average is not None:
            out["coupling"] = assemble_coupling(self.average, self.graph)
        self._ops["blocks"] = out
        return out

    def matrix(self):
        """The assembled system operator (3D form + edge forms + junctions + exchange)."""
        if "matrix" in self._ops:
            return self._ops["matrix"]
        b = self.blocks()
        n3, n1, nm = self.sizes
        entries = []
        if n3:
            entries.append((0, 0, b["a_h"], 1.0))
        if n1:
            entries.append((1, 1, b["a_lambda"], 1.0))
            entries.append((1, 1, b["dirichlet_1d"], 1.0))
            bv = b["b_v"]
            entries.append((1, 1, bv[:n1, :n1], 1.0))
            if nm:
                entries += [(1, 2, bv[:n1, n1:], 1.0), (2, 1, bv[n1:, :n1], 1.0),
                            (2, 2, bv[n1:, n1:], 1.0)]
        if "coupling" in b:
            c = b["coupling"]
            entries += [(0, 0, c.omega_omega, 1.0), (0, 1, c.omega_lambda, 1.0),
                        (1, 0, c.lambda_omega, 1.0), (1, 1, c.lambda_lambda, 1.0)]
        self._ops["matrix"] = block_compose(entries, self.sizes)
        return self._ops["matrix"]

    def mass(self):
        """Time-derivative operator: 3D mass and A-weighted 1D mass, none on multipliers."""
        if "mass" in self._ops:
            return self._ops["mass"]
        n3, n1, nm = self.sizes
        entries = []
        if n3:
            entries.append((0, 0, assemble_mass_3d(self.mesh, self.space3), 1.0))
        if n1:
            entries.append((1, 1, assemble_mass_1d(self.graph, self.edge_meshes, self.space1), 1.0))
        self._ops["mass"] = block_compose(entries, self.sizes)
        return self._ops["mass"]

    def rhs(self, f=None, f_hat=None, g=None, vertex_values=None):
        """Load vector for 3D source ``f(x)``, 1D source ``f_hat(e, s, x)``,
        3D boundary datum ``g(x)`` and boundary-vertex data ``{v: value}``."""
        n3, n1, nm = self.sizes
        parts = [np.zeros(n3), np.zeros(n1), np.zeros(nm)]
        if n3:
            if f is not None:
                parts[0] += assemble_load_3d(self.mesh, self.space3, f)
            if g is not None:
                parts[0] += dirichlet_rhs(self.mesh, self.space3, self.ipdg3, g)
        if n1:
            if f_hat is not None:
                parts[1] += assemble_load_1d(self.graph, self.edge_meshes, self.space1, f_hat)
            if vertex_values:
                missing = set(vertex_values) - set(self.dirichlet_vertices)
                if missing:
                    raise ValueError(f"vertices {sorted(missing)} are not Dirichlet vertices")
                parts[1] += dirichlet_vertex_rhs(self.graph, self.space1, self.ipdg1, vertex_values)
        return np.concatenate(parts)

    def solve(self, rhs, tol=1e-10, x0=None, maxit=None):
        x, report = cg_solve(self.matrix(), rhs, tol=tol, x0=x0, maxit=maxit)
        sol = Solution(*self.split(x), report=report,
                       residual_norm=report.residual * float(np.linalg.norm(rhs)))
        if self.multipliers is not None and self.multipliers.ndofs:
            sol.conservation = max(abs(r) for r in conservation_residuals(self, sol).values())
        return sol
