"""Backward Euler for the coupled parabolic system.

Each step solves (M/tau + K) x^n = M x^{n-1} / tau + b(t^n), where M carries
the 3D mass and the A-weighted edge mass and K is the steady operator. The
composed matrix is built once per step size.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .linalg import block_compose, cg_solve
from .assembly1d import assemble_load_1d, assemble_mass_1d


@dataclass(frozen=True)
class TimeGrid:
    final_time: float
    steps: int

    def __post_init__(self):
        if not self.final_time > 0:
            raise InvalidArgumentError(f"final time must be positive, got {self.final_time}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidArgumentError(f"step count must be a positive integer, got {self.steps}")

    @property
    def tau(self):
        return self.final_time / self.steps

    @property
    def times(self):
        return self.tau * np.arange(self.steps + 1)


@dataclass
class TransientState:
    u3d: np.ndarray
    u1d: np.ndarray
    multipliers: np.ndarray
    n: int = 0
    t: float = 0.0
    reports: list = field(default_factory=list)

    @property
    def vector(self):
        return np.concatenate([self.u3d, self.u1d, self.multipliers])


def _project_3d(space3, u0):
    from .assembly3d import assemble_load_3d
    b = assemble_load_3d(space3.mesh, space3, u0).reshape(-1, 4)
    vol = space3.mesh.volumes[:, None]
    # inverse of |K|/20 (I + 11^T) is 20/|K| (I - 11^T/5)
    return (20.0 / vol * (b - b.sum(axis=1, keepdims=True) / 5.0)).ravel()


def _project_1d(problem, u0_hat):
    # P is constant per edge, so the P-weighted projection equals the A-weighted one
    space1 = problem.space1
    M = assemble_mass_1d(problem.graph, problem.edge_meshes, space1).tocsr()
    b = assemble_load_1d(problem.graph, problem.edge_meshes, space1, u0_hat)
    out = np.empty(space1.ndofs)
    for e in range(problem.graph.num_edges):
        dofs = space1.interval_dofs(e)
        blocks = np.stack([M[d][:, d].toarray() for d in dofs])
        out[dofs] = np.linalg.solve(blocks, b[dofs][..., None])[..., 0]
    return out


def l2_project_initial(problem, u0=None, u0_hat=None):
    """L2 projections of the initial data; missing data are taken as zero.

    Junction multipliers start at the mean of the adjacent edge end values.
    """
    n3, n1, nm = problem.sizes
    u3d = _project_3d(problem.space3, u0) if (n3 and u0 is not None) else np.zeros(n3)
    u1d = _project_1d(problem, u0_hat) if (n1 and u0_hat is not None) else np.zeros(n1)
    mult = np.zeros(nm)
    if nm:
        for v in problem.multipliers.vertices:
            vals = []
            for e, sign in problem.graph.incident(int(v)):
                dofs, val, _ = problem.space1.endpoint(e, sign)
                vals.append(u1d[dofs] @ val)
            mult[problem.multipliers.index[int(v)]] = np.mean(vals)
    return TransientState(u3d, u1d, mult)


class StepOperator:
    """Caches M/tau + K for the current step size."""

    def __init__(self, problem):
        self.problem = problem
        self._tau = None
        self._matrix = None

    def matrix(self, tau):
        if tau != self._tau:
            pb = self.problem
            self._matrix = block_compose([(0, 0, pb.mass(), 1.0 / tau), (0, 0, pb.matrix(), 1.0)],
                                         [pb.ndofs])
            self._tau = tau
        return self._matrix


def step(state, operator, tau, load, tol=1e-10):
    """One backward Euler step; ``load`` is the assembled source vector at t^{n+1}."""
    if not tau > 0:
        raise InvalidArgumentError(f"time step must be positive, got {tau}")
    pb = operator.problem
    rhs = pb.mass() @ state.vector / tau + load
    x, report = cg_solve(operator.matrix(tau), rhs, tol=tol, x0=state.vector)
    u3d, u1d, mult = pb.split(x)
    return TransientState(u3d, u1d, mult, state.n + 1, state.t + tau,
                          state.reports + [report])


def run(problem, grid, state, load_at, tol=1e-10, callback=None):
    """Advance ``state`` over ``grid``; ``load_at(t)`` returns the source vector at time t.

    ``callback(state)`` is invoked after every step (used for snapshots and norms).
    """
    op = StepOperator(problem)
    for n in range(grid.steps):
        t = (n + 1) * grid.tau
        state = step(state, op, grid.tau, load_at(t), tol=tol)
        state.t = t
        if callback is not None:
            callback(state)
    return state


def l2_norm_3d(problem, u3d):
    M = problem.mass()
    n3 = problem.sizes[0]
    return math.sqrt(float(u3d @ (M[:n3, :n3] @ u3d)))


@dataclass
class DecayingMms:
    """Steady manufactured pair damped in time: u(t) = exp(-rate t) u_s.

    Sources follow from the time derivative: f(t) = exp(-rate t)(f_s - rate u_s)
    and likewise on the edges.
    """
    steady: object
    rate: float = 1.0

    def _damp(self, t):
        return math.exp(-self.rate * t)

    def u(self, t):
        return lambda x: self._damp(t) * self.steady.u(x)

    def grad_u(self, t):
        return lambda x: self._damp(t) * self.steady.grad_u(x)

    def u_hat(self, t):
        return lambda e, s, x: self._damp(t) * self.steady.u_hat(e, s, x)

    def du_hat(self, t):
        return lambda e, s, x: self._damp(t) * self.steady.du_hat(e, s, x)

    def f(self, t):
        return lambda x: self._damp(t) * (self.steady.f(x) - self.rate * self.steady.u(x))

    def f_hat(self, t):
        return lambda e, s, x: self._damp(t) * (self.steady.f_hat(e, s, x)
                                                - self.rate * self.steady.u_hat(e, s, x))

    def g(self, t):
        return lambda x: self._damp(t) * self.steady.g(x)
