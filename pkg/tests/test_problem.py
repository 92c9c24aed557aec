import numpy as np
import pytest
from hypothesis import given, strategies as st

from dg3d1d.assembly1d import Ipdg1Params
from dg3d1d.assembly3d import IpdgParams
from dg3d1d.network1d import build_edge_meshes
from dg3d1d.problem import CoupledProblem
from dg3d1d.verify import Mms3d1d, MmsNetwork


@pytest.fixture(scope="module")
def coupled():
    mms = Mms3d1d()
    g = mms.graph()
    return CoupledProblem(mesh=mms.mesh(4), graph=g, edge_meshes=build_edge_meshes(g, cells_per_edge=4))


@pytest.fixture(scope="module")
def network():
    mms = MmsNetwork()
    g = mms.graph()
    return CoupledProblem(graph=g, edge_meshes=build_edge_meshes(g, h=0.125),
                          dirichlet_vertices=[0, 4, 5, 6, 7],
                          ipdg1=Ipdg1Params(sigma=10, sigma_v=10))


def test_sizes_and_split(coupled):
    n3, n1, nm = coupled.sizes
    assert (n3, n1, nm) == (4 * 6 * 64, 8, 0)
    x = np.arange(coupled.ndofs, dtype=float)
    a, b, c = coupled.split(x)
    assert len(a) == n3 and len(b) == n1 and len(c) == 0


@given(st.integers(0, 10_000))
def test_coupled_matrix_positive(coupled, seed):
    A = coupled.matrix()
    x = np.random.default_rng(seed).normal(size=coupled.ndofs)
    assert x @ (A @ x) > 0


@given(st.integers(0, 10_000))
def test_network_matrix_positive(network, seed):
    A = network.matrix()
    x = np.random.default_rng(seed).normal(size=network.ndofs)
    assert x @ (A @ x) > 0


def test_systems_symmetric_and_cg_converges(coupled, network):
    for pb in (coupled, network):
        A = pb.matrix()
        assert abs(A - A.T).max() < 1e-12 * abs(A).max()
        b = np.random.default_rng(1).normal(size=pb.ndofs)
        sol = pb.solve(b, tol=1e-10)
        assert sol.report.converged


def test_pure_3d_problem():
    mms = Mms3d1d()
    pb = CoupledProblem(mesh=mms.mesh(2), ipdg3=IpdgParams(sigma=20))
    assert pb.sizes == (4 * 48, 0, 0)
    sol = pb.solve(pb.rhs(g=lambda x: 1 + x[:, 0]), tol=1e-12)
    assert np.allclose(sol.u3d, pb.space3.interpolate(lambda x: 1 + x[:, 0]), atol=1e-9)


def test_dirichlet_only_on_boundary_vertices():
    g = MmsNetwork().graph()
    with pytest.raises(ValueError, match="degree-1"):
        CoupledProblem(graph=g, edge_meshes=build_edge_meshes(g, h=0.5), dirichlet_vertices=[1])
    pb = CoupledProblem(graph=g, edge_meshes=build_edge_meshes(g, h=0.5), dirichlet_vertices=[0],
                        ipdg1=Ipdg1Params(sigma=10, sigma_v=10))
    with pytest.raises(ValueError, match="not Dirichlet"):
        pb.rhs(vertex_values={4: 1.0})


def test_mass_has_no_multiplier_block(network):
    M = network.mass()
    n3, n1, nm = network.sizes
    assert M[n1:, :].nnz == 0
    assert np.ones(n1) @ (M[:n1, :n1] @ np.ones(n1)) == pytest.approx(np.sum(network.graph.lengths))
