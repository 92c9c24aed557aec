import numpy as np
import pytest

from dg3d1d.errors import InvalidArgumentError
from dg3d1d.problem import CoupledProblem
from dg3d1d.network1d import build_edge_meshes
from dg3d1d.timestepping import (DecayingMms, StepOperator, TimeGrid, TransientState,
                                 l2_norm_3d, l2_project_initial, run, step)
from dg3d1d.verify import Mms3d1d, errors_1d, errors_3d


@pytest.fixture(scope="module")
def problem():
    mms = Mms3d1d()
    g = mms.graph()
    return CoupledProblem(mesh=mms.mesh(4), graph=g,
                          edge_meshes=build_edge_meshes(g, cells_per_edge=4))


def test_time_grid():
    g = TimeGrid(0.5, 5)
    assert g.tau == pytest.approx(0.1)
    assert np.allclose(g.times, np.linspace(0, 0.5, 6))
    for bad in ((0.0, 3), (1.0, 0), (1.0, 2.5)):
        with pytest.raises(InvalidArgumentError):
            TimeGrid(*bad)


def test_projection_reproduces_affine(problem):
    u0 = lambda x: 1 + x @ np.array([0.3, -0.2, 0.7])
    st = l2_project_initial(problem, u0, lambda e, s, x: 2 - 0.5 * s)
    assert np.allclose(st.u3d, problem.space3.interpolate(u0), atol=1e-12)
    assert np.allclose(st.u1d, problem.space1.interpolate(lambda e, s, x: 2 - 0.5 * s), atol=1e-12)
    empty = l2_project_initial(problem)
    assert not empty.vector.any()


def test_projection_of_smooth_field_is_second_order():
    f = lambda x: np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])
    fh = lambda e, s, x: np.sin(3 * s)
    errs3, errs1 = [], []
    for n in (4, 8):
        mms = Mms3d1d()
        g = mms.graph()
        pb = CoupledProblem(mesh=mms.mesh(n), graph=g,
                            edge_meshes=build_edge_meshes(g, cells_per_edge=n))
        st = l2_project_initial(pb, f, fh)
        errs3.append(errors_3d(pb.space3, st.u3d, f, lambda x: np.zeros_like(x))["L2"])
        errs1.append(errors_1d(pb.space1, st.u1d, fh, lambda e, s, x: 3 * np.cos(3 * s))["L2"])
    assert np.log2(errs3[0] / errs3[1]) > 1.8
    assert np.log2(errs1[0] / errs1[1]) > 1.9


def test_dissipative_without_source(problem, rng):
    n3, n1, nm = problem.sizes
    st = TransientState(rng.normal(size=n3), rng.normal(size=n1), rng.normal(size=nm))
    zero = np.zeros(problem.ndofs)
    norms = [l2_norm_3d(problem, st.u3d)]
    run(problem, TimeGrid(1.0, 10), st, lambda t: zero,
        callback=lambda s: norms.append(l2_norm_3d(problem, s.u3d)))
    assert np.all(np.diff(norms) < 0)


def test_step_operator_cache_and_fixed_point(problem):
    op = StepOperator(problem)
    M1 = op.matrix(0.1)
    assert op.matrix(0.1) is M1
    assert op.matrix(0.2) is not M1
    # the steady solution is a fixed point when the load is the steady load
    mms = Mms3d1d()
    rhs = problem.rhs(f=mms.f, f_hat=mms.f_hat, g=mms.g)
    sol = problem.solve(rhs, tol=1e-13)
    st = TransientState(sol.u3d, sol.u1d, sol.multipliers)
    nxt = step(st, op, 0.05, rhs, tol=1e-13)
    assert np.abs(nxt.vector - st.vector).max() < 1e-9
    assert nxt.n == 1 and nxt.t == pytest.approx(0.05)
    with pytest.raises(InvalidArgumentError):
        step(st, op, 0.0, rhs)


def test_decaying_mms_sources():
    d = DecayingMms(Mms3d1d(), rate=2.0)
    x = np.array([[0.2, 0.1, 0.3], [0.01, 0.0, -0.2]])
    t = 0.4
    damp = np.exp(-0.8)
    assert np.allclose(d.u(t)(x), damp * Mms3d1d().u(x))
    # u_t = -rate u, so f = damp (f_s - rate u_s)
    assert np.allclose(d.f(t)(x), damp * (Mms3d1d().f(x) - 2.0 * Mms3d1d().u(x)))
    s = np.array([0.1])
    assert np.allclose(d.f_hat(t)(0, s, x[:1]),
                       damp * (Mms3d1d().f_hat(0, s, x[:1]) - 2.0 * Mms3d1d().u_hat(0, s, x[:1])))
