"""Manufactured solutions, error norms, convergence tables and junction residuals."""

import math
from dataclasses import dataclass, field

import numpy as np

from .assembly1d import Ipdg1Params
from .errors import ConvergenceError
from .assembly3d import _bary_at, face_quadrature
from .mesh3d import build_box_mesh
from .network1d import VesselGraph, build_edge_meshes, classify_vertices
from .spaces import interval_rule, lagrange_1d, tet_rule, triangle_rule


# -- manufactured solutions -------------------------------------------------

@dataclass
class Mms3d1d:
    """Single straight vessel along the z axis of (-1/2, 1/2)^3.

    The 3D solution is logarithmic in the distance to the axis outside the
    vessel and constant across the vessel inside; both branches meet at r = R.
    """
    xi: float = 1.0
    radius: float = 0.05

    @property
    def c(self):
        return self.xi / (self.xi + 1.0)

    @property
    def area(self):
        return math.pi * self.radius**2

    @property
    def perimeter(self):
        return 2.0 * math.pi * self.radius

    def graph(self, cells=None):
        return VesselGraph(vertices=[[0, 0, -0.5], [0, 0, 0.5]], edges=[[0, 1]],
                           radius=self.radius, xi=self.xi, cells=cells)

    def mesh(self, n):
        return build_box_mesh(n, (-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))

    @staticmethod
    def u_hat_z(z):
        return np.sin(np.pi * z) + 2.0

    def _radial(self, x):
        r = np.hypot(x[:, 0], x[:, 1])
        outer = r > self.radius
        factor = np.ones_like(r)
        factor[outer] = 1.0 - self.radius * np.log(r[outer] / self.radius)
        return r, outer, factor

    def u(self, x):
        _, _, factor = self._radial(x)
        return self.c * factor * self.u_hat_z(x[:, 2])

    def grad_u(self, x):
        r, outer, factor = self._radial(x)
        z = x[:, 2]
        uh = self.u_hat_z(z)
        g = np.zeros_like(x)
        ro = r[outer]
        # d/dx (1 - R ln(r/R)) = -R x / r^2
        g[outer, 0] = -self.c * self.radius * x[outer, 0] / ro**2 * uh[outer]
        g[outer, 1] = -self.c * self.radius * x[outer, 1] / ro**2 * uh[outer]
        g[:, 2] = self.c * factor * np.pi * np.cos(np.pi * z)
        return g

    def f(self, x):
        # the xy part is harmonic off the axis; only -d_zz survives branchwise
        _, _, factor = self._radial(x)
        return self.c * factor * np.pi**2 * np.sin(np.pi * x[:, 2])

    def g(self, x):
        return self.u(x)

    def u_hat(self, e, s, x):
        return self.u_hat_z(x[:, 2])

    def du_hat(self, e, s, x):
        return np.pi * np.cos(np.pi * x[:, 2])

    def f_hat(self, e, s, x):
        z = x[:, 2]
        exchange = self.perimeter / self.area * self.xi / (self.xi + 1.0)
        return np.pi**2 * np.sin(np.pi * z) + exchange * self.u_hat_z(z)


@dataclass
class MmsNetwork:
    """Planar tree with three bifurcations; unit cross-section area, no 3D exchange."""
    vertices: np.ndarray = field(default_factory=lambda: np.array(
        [[0, 0], [0, 1], [-1, 2], [1, 2], [-1.5, 3], [-0.5, 3], [0.5, 3], [1.5, 3]], dtype=float))
    edges: np.ndarray = field(default_factory=lambda: np.array(
        [[0, 1], [1, 2], [1, 3], [2, 4], [2, 5], [3, 6], [3, 7]]))

    def graph(self, xi=0.0):
        # radius chosen so that A_e = 1
        return VesselGraph(self.vertices, self.edges, radius=1.0 / math.sqrt(math.pi), xi=xi)

    @staticmethod
    def _branch(e):
        return 0 if e == 0 else (1 if e <= 2 else 2)

    def u_hat(self, e, s, x):
        y = x[:, 1]
        b = self._branch(e)
        if b == 0:
            return y + np.cos(2 * np.pi * y)
        if b == 1:
            return 2.0 + 0.5 * math.sqrt(2) * (y - 1.0)
        return 2.0 + 0.5 * math.sqrt(2) + math.sqrt(5) / 8.0 * (y - 2.0)

    def dy_ds(self, e):
        d = self.vertices[self.edges[e, 1]] - self.vertices[self.edges[e, 0]]
        return d[1] / np.linalg.norm(d)

    def du_hat(self, e, s, x):
        y = x[:, 1]
        b = self._branch(e)
        if b == 0:
            dy = 1.0 - 2 * np.pi * np.sin(2 * np.pi * y)
        elif b == 1:
            dy = np.full_like(y, 0.5 * math.sqrt(2))
        else:
            dy = np.full_like(y, math.sqrt(5) / 8.0)
        return dy * self.dy_ds(e)

    def f_hat(self, e, s, x):
        y = x[:, 1]
        if e == 0:
            return 4 * np.pi**2 * np.cos(2 * np.pi * y)
        return np.zeros_like(y)

    def boundary_values(self, graph):
        boundary, _, _ = classify_vertices(graph)
        vals = {}
        for v in boundary:
            e, sign = graph.incident(int(v))[0]
            s = np.array([0.0 if sign > 0 else graph.lengths[e]])
            vals[int(v)] = float(self.u_hat(e, s, graph.vertices[[v]])[0])
        return vals


# -- error norms ------------------------------------------------------------

def errors_3d(space3, coeffs, u, grad_u, rule=None):
    """L2 error, broken H1 seminorm error and full broken H1 error."""
    rule = rule or tet_rule(5)
    pts, lam, w = space3.quadrature_points(rule)
    loc = coeffs[space3.cell_dofs()]  # (nc, 4)
    uh = loc @ lam.T  # (nc, nq)
    gh = np.einsum("ci,cid->cd", loc, space3.grads())
    flat = pts.reshape(-1, 3)
    eu = u(flat).reshape(uh.shape) - uh
    eg = grad_u(flat).reshape(uh.shape + (3,)) - gh[:, None, :]
    l2 = float(np.sqrt(np.sum(w * eu**2)))
    semi = float(np.sqrt(np.sum(w * np.sum(eg**2, axis=2))))
    return {"L2": l2, "H1semi": semi, "H1": math.hypot(l2, semi)}


def _edge_values(space1, coeffs, e, xref):
    val, der = lagrange_1d(space1.degree, xref)
    loc = coeffs[space1.interval_dofs(e)]
    return loc @ val.T, loc @ der.T / space1.meshes[e].h


def errors_1d(space1, coeffs, u_hat, du_hat, degree=12):
    """Unweighted L2 and full broken H1 errors along all edges."""
    rule = interval_rule(degree)
    l2 = semi = 0.0
    for e, m in enumerate(space1.meshes):
        s, x = space1.points(e, rule.points)
        vh, dh = _edge_values(space1, coeffs, e, rule.points)
        ev = u_hat(e, s.ravel(), x.reshape(-1, 3)).reshape(s.shape) - vh
        ed = du_hat(e, s.ravel(), x.reshape(-1, 3)).reshape(s.shape) - dh
        w = m.h * rule.weights
        l2 += float(np.sum(w * ev**2))
        semi += float(np.sum(w * ed**2))
    return {"L2": math.sqrt(l2), "H1semi": math.sqrt(semi), "H1": math.sqrt(l2 + semi)}


def edge_jumps(space1, coeffs, e):
    """Jumps u(s_i^-) - u(s_i^+) at the interior nodes of edge e."""
    m = space1.meshes[e]
    v0 = lagrange_1d(space1.degree, 0.0)[0][0]
    v1 = lagrange_1d(space1.degree, 1.0)[0][0]
    loc = coeffs[space1.interval_dofs(e)]
    return loc[:-1] @ v1 - loc[1:] @ v0 if m.num_cells > 1 else np.zeros(0)


def edge_end_values(space1, coeffs, e):
    loc = coeffs[space1.interval_dofs(e)]
    return float(loc[0, 0]), float(loc[-1, -1])


def dg_norm_coupled(problem, sol, mms, sigma3=None, sigma1=None):
    """Coupled DG norm of the error (3D energy, 1D seminorm, averaged exchange deficit)."""
    mesh, space3, space1 = problem.mesh, problem.space3, problem.space1
    sigma3 = problem.ipdg3.sigma if sigma3 is None else sigma3
    sigma1 = problem.ipdg1.sigma if sigma1 is None else sigma1
    e3 = errors_3d(space3, sol.u3d, mms.u, mms.grad_u)
    part3 = e3["H1semi"] ** 2
    # interior jumps of the error are minus the jumps of u_h
    pts, w = face_quadrature(mesh.vertices, mesh.interior_faces, mesh.interior_areas)
    c = mesh.interior_cells
    j = (np.einsum("fqi,fi->fq", _bary_at(mesh, c[:, 0], pts), sol.u3d[space3.cell_dofs(c[:, 0])])
         - np.einsum("fqi,fi->fq", _bary_at(mesh, c[:, 1], pts), sol.u3d[space3.cell_dofs(c[:, 1])]))
    part3 += float(np.sum(sigma3 / np.sqrt(mesh.interior_areas)[:, None] * w * j**2))
    pts, w = face_quadrature(mesh.vertices, mesh.boundary_faces, mesh.boundary_areas,
                             triangle_rule(4))
    cb = mesh.boundary_cells
    uhb = np.einsum("fqi,fi->fq", _bary_at(mesh, cb, pts), sol.u3d[space3.cell_dofs(cb)])
    eb = mms.u(pts.reshape(-1, 3)).reshape(uhb.shape) - uhb
    part3 += float(np.sum(sigma3 / np.sqrt(mesh.boundary_areas)[:, None] * w * eb**2))

    e1 = errors_1d(space1, sol.u1d, mms.u_hat, mms.du_hat)
    part1 = e1["H1semi"] ** 2
    for e, m in enumerate(space1.meshes):
        part1 += float(np.sum(sigma1 / m.h * edge_jumps(space1, sol.u1d, e) ** 2))

    avg = problem.average
    graph = problem.graph
    exact_avg = avg.average_of(mms.u)
    exact_1d = np.concatenate([mms.u_hat(e, avg.s[avg.edge == e], avg.centers[avg.edge == e])
                               for e in range(graph.num_edges)])
    deficit = (exact_avg - avg.matrix @ sol.u3d) - (exact_1d - avg.eval1d @ sol.u1d)
    part_c = float(np.sum(avg.weights * graph.perimeters[avg.edge] * deficit**2))
    return {"dg3": math.sqrt(part3), "dg1": math.sqrt(part1), "coupling": math.sqrt(part_c),
            "dg": math.sqrt(part3 + part1 + part_c)}


def dg_norm_network(problem, sol, u_hat, du_hat):
    """Edge DG norm with boundary terms plus junction mismatch terms, on the error."""
    space1, graph = problem.space1, problem.graph
    sigma = problem.ipdg1.sigma
    total = errors_1d(space1, sol.u1d, u_hat, du_hat)["H1semi"] ** 2
    for e, m in enumerate(space1.meshes):
        total += float(np.sum(sigma / m.h * edge_jumps(space1, sol.u1d, e) ** 2))
        a, b = edge_end_values(space1, sol.u1d, e)
        ends = graph.vertices[graph.edges[e]]
        exact = u_hat(e, np.array([0.0, m.length]), ends)
        total += sigma / m.h * ((exact[0] - a) ** 2 + (exact[1] - b) ** 2)
    total += junction_mismatch_sq(problem, sol, sigma)
    return math.sqrt(total)


def junction_mismatch_sq(problem, sol, sigma):
    space1, graph, mult = problem.space1, problem.graph, problem.multipliers
    _, bif, _ = classify_vertices(graph)
    total = 0.0
    for v in bif:
        ut = sol.multipliers[mult.index[int(v)]]
        for e, sign in graph.incident(int(v)):
            a, b = edge_end_values(space1, sol.u1d, e)
            total += sigma / space1.meshes[e].h * ((a if sign > 0 else b) - ut) ** 2
    return total


def _end_state(problem, sol, e, sign):
    dofs, val, der = problem.space1.endpoint(e, sign)
    return float(sol.u1d[dofs] @ val), float(sol.u1d[dofs] @ der)


def flux_residuals(problem, sol):
    """j_h(v) = sum_e d_s u_e(v) n_e(v) at every bifurcation, as {v: value}."""
    graph = problem.graph
    _, bif, _ = classify_vertices(graph)
    out = {}
    for v in bif:
        out[int(v)] = sum(sign * _end_state(problem, sol, e, sign)[1]
                          for e, sign in graph.incident(int(v)))
    return out


def flux_residual(problem, sol):
    res = flux_residuals(problem, sol)
    return max((abs(r) for r in res.values()), default=0.0)


def conservation_residuals(problem, sol):
    """Discrete junction balance: sum A d_s u n + sum (sigma_v/h)(u_e(v) - u~_v) per junction."""
    graph, mult = problem.graph, problem.multipliers
    sigma_v = problem.ipdg1.sigma_v
    out = {}
    for v in mult.vertices:
        ut = sol.multipliers[mult.index[int(v)]]
        total = 0.0
        for e, sign in graph.incident(int(v)):
            val, der = _end_state(problem, sol, e, sign)
            total += graph.areas[e] * der * sign + sigma_v / problem.space1.meshes[e].h * (val - ut)
        out[int(v)] = total
    return out


# -- rate tables ------------------------------------------------------------

def eoc(errors, hs):
    """Experimental orders of convergence between successive rows (first is None)."""
    rates = [None]
    for i in range(1, len(errors)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 > 0 and e1 > 0:
            rates.append(math.log(e0 / e1) / math.log(hs[i - 1] / hs[i]))
        else:
            rates.append(float("nan"))
    return rates


@dataclass
class RateTable:
    study: str
    param: str  # name of the refinement column (N, h, tau)
    levels: list
    hs: list
    errors: dict  # norm name -> list of errors

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.hs, self.hs[1:])):
            raise ValueError("mesh sizes must strictly decrease")

    def rates(self, norm):
        return eoc(self.errors[norm], self.hs)

    @property
    def columns(self):
        cols = [self.param, "h"]
        for name in self.errors:
            cols += [name, f"{name}_rate"]
        return cols

    def rows(self):
        out = []
        rates = {k: self.rates(k) for k in self.errors}
        for i, lvl in enumerate(self.levels):
            row = [lvl, self.hs[i]]
            for k in self.errors:
                row += [self.errors[k][i], rates[k][i]]
            out.append(row)
        return out

    def to_csv(self):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, (int, np.integer)):
                return str(int(v))
            return f"{v:.6e}"
        lines = [",".join(self.columns)]
        lines += [",".join(fmt(v) for v in row) for row in self.rows()]
        return "\n".join(lines) + "\n"

    def format(self):
        lines = ["  ".join(f"{c:>12}" for c in self.columns)]
        for row in self.rows():
            lines.append("  ".join(
                f"{'-':>12}" if v is None else (f"{v:>12}" if isinstance(v, (int, np.integer))
                                                 else f"{v:>12.4e}") for v in row))
        return "\n".join(lines)


# -- convergence studies ----------------------------------------------------

STUDIES = ("mms3d1d", "mms_network", "heat")
CONSERVATION_TOL = 1e-8


def _study_mms3d1d(levels, tol, opts):
    from .problem import CoupledProblem
    mms = Mms3d1d()
    graph = mms.graph()
    for n in levels:
        pb = CoupledProblem(mesh=mms.mesh(n), graph=graph,
                            edge_meshes=build_edge_meshes(graph, cells_per_edge=n), **opts)
        sol = pb.solve(pb.rhs(f=mms.f, f_hat=mms.f_hat, g=mms.g), tol=tol or 1e-10)
        e3 = errors_3d(pb.space3, sol.u3d, mms.u, mms.grad_u)
        e1 = errors_1d(pb.space1, sol.u1d, mms.u_hat, mms.du_hat)
        errs = {"H1_3d": e3["H1"], "L2_3d": e3["L2"], "H1_1d": e1["H1"], "L2_1d": e1["L2"]}
        yield n, 1.0 / n, errs, pb, sol


def _study_network(levels, tol, opts):
    from .problem import CoupledProblem
    mms = MmsNetwork()
    graph = mms.graph()
    boundary, _, _ = classify_vertices(graph)
    opts.setdefault("ipdg1", Ipdg1Params(sigma=10.0, sigma_v=10.0))
    for h in levels:
        pb = CoupledProblem(graph=graph, edge_meshes=build_edge_meshes(graph, h=h),
                            dirichlet_vertices=boundary, **opts)
        # tight tolerance: the junction balance is checked in absolute terms
        sol = pb.solve(pb.rhs(f_hat=mms.f_hat, vertex_values=mms.boundary_values(graph)),
                       tol=tol or 1e-12)
        if sol.conservation > max(CONSERVATION_TOL, 2.0 * sol.residual_norm):
            raise ConvergenceError(
                f"junction balance violated: {sol.conservation:.3e} at h={h}", sol.report)
        errs = {"dg": dg_norm_network(pb, sol, mms.u_hat, mms.du_hat),
                "flux": flux_residual(pb, sol)}
        yield h, h, errs, pb, sol


def _study_heat(levels, tol, opts, n=8, final_time=0.5, rate=4.0, callback=None):
    from .problem import CoupledProblem
    from .timestepping import DecayingMms, TimeGrid, l2_project_initial, run
    steady = Mms3d1d()
    mms = DecayingMms(steady, rate)
    graph = steady.graph()
    pb = CoupledProblem(mesh=steady.mesh(n), graph=graph,
                        edge_meshes=build_edge_meshes(graph, cells_per_edge=n), **opts)
    for steps in levels:
        grid = TimeGrid(final_time, steps)
        state = l2_project_initial(pb, mms.u(0.0), mms.u_hat(0.0))
        step_cb = (lambda st, steps=steps: callback(steps, pb, st)) if callback else None
        state = run(pb, grid, state,
                    lambda t: pb.rhs(f=mms.f(t), f_hat=mms.f_hat(t), g=mms.g(t)),
                    tol=tol or 1e-10, callback=step_cb)
        e3 = errors_3d(pb.space3, state.u3d, mms.u(final_time), mms.grad_u(final_time))
        e1 = errors_1d(pb.space1, state.u1d, mms.u_hat(final_time), mms.du_hat(final_time))
        yield steps, grid.tau, {"L2_3d": e3["L2"], "L2_1d": e1["L2"]}, pb, state


_PARAM = {"mms3d1d": "N", "mms_network": "level_h", "heat": "steps"}


def iter_study(study, levels, tol=None, problem_options=None, **study_options):
    """Yield (level, h, errors, problem, solution) per level of a manufactured study."""
    if study not in STUDIES:
        raise ValueError(f"unknown study {study!r}; choose from {', '.join(STUDIES)}")
    opts = dict(problem_options or {})
    if study == "heat":
        return _study_heat(levels, tol, opts, **study_options)
    if study_options:
        raise ValueError(f"unexpected options for {study}: {sorted(study_options)}")
    return (_study_mms3d1d if study == "mms3d1d" else _study_network)(levels, tol, opts)


def run_convergence(study, levels, tol=None, problem_options=None, on_level=None,
                    **study_options):
    """Solve the manufactured problem of ``study`` on each level and tabulate errors.

    Levels are N (box subdivisions) for ``mms3d1d``, target edge mesh sizes
    for ``mms_network`` and step counts for ``heat``. ``problem_options`` go
    to CoupledProblem; the heat study also takes ``n``, ``final_time``,
    ``rate`` and a per-step ``callback(steps, problem, state)``. A failure at
    any level re-raises with the rows computed so far attached as
    ``partial_table``.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    param = _PARAM.get(study)
    done, hs, errors = [], [], {}
    try:
        for lvl, h, errs, pb, sol in iter_study(study, levels, tol, problem_options,
                                                **study_options):
            done.append(lvl)
            hs.append(h)
            for k, v in errs.items():
                errors.setdefault(k, []).append(v)
            if on_level is not None:
                on_level(lvl, pb, sol)
    except Exception as exc:
        if done:
            exc.partial_table = RateTable(study, param, done, hs, errors)
        raise
    return RateTable(study, param, done, hs, errors)
