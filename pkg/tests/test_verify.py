import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dg3d1d.assembly1d import Ipdg1Params
from dg3d1d.network1d import VesselGraph, build_edge_meshes, classify_vertices
from dg3d1d.problem import CoupledProblem, Solution
from dg3d1d.verify import (Mms3d1d, MmsNetwork, RateTable, conservation_residuals, dg_norm_network,
                           eoc, errors_1d, errors_3d, flux_residual, flux_residuals,
                           run_convergence)
from dg3d1d.spaces import DgSpace3
from dg3d1d.mesh3d import build_box_mesh

MMS = Mms3d1d()


def _laplacian_fd(f, x, h=1e-4):
    out = np.zeros(len(x))
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        out += (f(x + e) - 2 * f(x) + f(x - e)) / h**2
    return out


@given(st.floats(-0.45, 0.45), st.floats(-0.45, 0.45), st.floats(-0.45, 0.45))
def test_source_matches_laplacian(x, y, z):
    p = np.array([[x, y, z]])
    r = math.hypot(x, y)
    if abs(r - MMS.radius) < 1e-3:
        return
    assert -_laplacian_fd(MMS.u, p)[0] == pytest.approx(MMS.f(p)[0], rel=1e-4, abs=1e-4)


def test_inner_source_is_not_pi2_u():
    # inside the vessel f = c pi^2 sin(pi z) while u = c (sin(pi z) + 2)
    p = np.array([[0.0, 0.0, 0.25]])
    c = MMS.c
    assert MMS.f(p)[0] == pytest.approx(c * math.pi**2 * math.sin(math.pi * 0.25))
    assert MMS.f(p)[0] != pytest.approx(math.pi**2 * MMS.u(p)[0])


def test_gradient_matches_fd(rng):
    pts = rng.uniform(-0.45, 0.45, size=(20, 3))
    h = 1e-6
    g = MMS.grad_u(pts)
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        fd = (MMS.u(pts + e) - MMS.u(pts - e)) / (2 * h)
        assert np.allclose(g[:, d], fd, atol=1e-6)


def test_boundary_value_and_continuity():
    p = np.array([[0.5, 0.5, 0.0]])
    r = math.sqrt(0.5)
    assert MMS.g(p)[0] == pytest.approx(0.5 * (1 - 0.05 * math.log(r / 0.05)) * 2.0)
    z = np.array([0.3])
    inner = MMS.u(np.array([[MMS.radius * (1 - 1e-12), 0, 0.3]]))
    outer = MMS.u(np.array([[MMS.radius * (1 + 1e-12), 0, 0.3]]))
    assert inner == pytest.approx(outer, abs=1e-12)
    assert inner[0] == pytest.approx(MMS.c * MMS.u_hat_z(z)[0])


def test_1d_source_balances():
    z = np.linspace(-0.5, 0.5, 7)
    x = np.column_stack([0 * z, 0 * z, z])
    # -u'' + (P/A) xi (u^ - avg u) with avg u = c u^
    lhs = (math.pi**2 * np.sin(math.pi * z)
           + MMS.perimeter / MMS.area * MMS.xi * (1 - MMS.c) * MMS.u_hat(0, z, x))
    assert np.allclose(lhs, MMS.f_hat(0, z, x))
    # and the exchange balance on the 3D side: flux from the cylinder equals P xi (u^ - avg u)
    rr = MMS.radius
    dudr = -MMS.c * rr / rr * MMS.u_hat_z(z)
    assert np.allclose(-2 * math.pi * rr * dudr,
                       MMS.perimeter * MMS.xi * (1 - MMS.c) * MMS.u_hat_z(z))


def test_network_exact_solution_conserves():
    mms = MmsNetwork()
    g = mms.graph()
    assert np.allclose(g.areas, 1.0)
    _, bif, _ = classify_vertices(g)
    for v in bif:
        p = g.vertices[[v]]
        vals, flux = [], 0.0
        for e, sign in g.incident(int(v)):
            s = np.array([0.0 if sign > 0 else g.lengths[e]])
            vals.append(mms.u_hat(e, s, p)[0])
            flux += sign * mms.du_hat(e, s, p)[0]
        assert np.ptp(vals) < 1e-14
        assert abs(flux) < 1e-13
    # -u'' = f on the trunk
    y = np.linspace(0, 1, 9)
    x = np.column_stack([0 * y, y])
    h = 1e-4
    upp = (mms.u_hat(0, y, x + [0, h]) - 2 * mms.u_hat(0, y, x) + mms.u_hat(0, y, x - [0, h])) / h**2
    assert np.allclose(-upp, mms.f_hat(0, y, x), atol=1e-4)


def _network_problem(h=0.125):
    mms = MmsNetwork()
    g = mms.graph()
    bnd, _, _ = classify_vertices(g)
    return mms, CoupledProblem(graph=g, edge_meshes=build_edge_meshes(g, h=h),
                               dirichlet_vertices=bnd, ipdg1=Ipdg1Params(sigma=10, sigma_v=10))


def test_network_norm_of_exact_linear_pieces():
    # on the linear branches the interpolant is exact, so only the trunk contributes
    mms, pb = _network_problem()
    u = pb.space1.interpolate(mms.u_hat)
    mult = np.array([mms.u_hat(1, np.zeros(1), pb.graph.vertices[[v]])[0]
                     for v in pb.multipliers.vertices])
    sol = Solution(np.zeros(0), u, mult)
    base = dg_norm_network(pb, sol, mms.u_hat, mms.du_hat)
    trunk_only = errors_1d(pb.space1, u, mms.u_hat, mms.du_hat)["H1semi"]
    assert base == pytest.approx(trunk_only, rel=1e-12)
    sol.multipliers = mult + np.array([0.01, 0, 0])
    bumped = dg_norm_network(pb, sol, mms.u_hat, mms.du_hat)
    # three edges meet at vertex 1 with h = 0.125 except the trunk mesh
    h = [pb.space1.meshes[e].h for e, _ in pb.graph.incident(1)]
    extra = sum(10 / hh * 1e-4 for hh in h)
    assert bumped**2 == pytest.approx(base**2 + extra, rel=1e-10)


def test_flux_residual_zero_for_linear_graph():
    g = VesselGraph([[0, 0, 0], [1, 0, 0], [2, 1, 0], [2, -1, 0]], [[0, 1], [1, 2], [1, 3]], 0.2, 0)
    pb = CoupledProblem(graph=g, edge_meshes=build_edge_meshes(g, h=0.2), dirichlet_vertices=[0, 2, 3],
                        ipdg1=Ipdg1Params(sigma=10, sigma_v=10))
    # constant data: the discrete solution is constant, fluxes and balance vanish
    sol = pb.solve(pb.rhs(vertex_values={0: 1.0, 2: 1.0, 3: 1.0}), tol=1e-13)
    assert flux_residual(pb, sol) < 1e-10
    assert max(abs(v) for v in conservation_residuals(pb, sol).values()) < 1e-10
    assert set(flux_residuals(pb, sol)) == {1}


def test_conservation_holds_on_network_solve():
    mms, pb = _network_problem(0.0625)
    sol = pb.solve(pb.rhs(f_hat=mms.f_hat, vertex_values=mms.boundary_values(pb.graph)), tol=1e-12)
    assert sol.conservation < 1e-8


def test_errors_vanish_for_exact_affine_fields():
    m = build_box_mesh(2)
    sp3 = DgSpace3(m)
    u = lambda x: 1 + 2 * x[:, 0] - x[:, 2]
    gu = lambda x: np.tile([2.0, 0.0, -1.0], (len(x), 1))
    e = errors_3d(sp3, sp3.interpolate(u), u, gu)
    assert e["L2"] < 1e-14 and e["H1semi"] < 1e-13


def test_eoc_and_rate_table():
    assert eoc([1.0, 0.25, 0.0625], [1, 0.5, 0.25])[1:] == pytest.approx([2.0, 2.0])
    assert math.isnan(eoc([1.0, 0.0], [1, 0.5])[1])
    t = RateTable("x", "N", [4, 8, 16], [0.25, 0.125, 0.0625], {"L2": [1e-2, 2.5e-3, 6.25e-4]})
    csv = t.to_csv()
    assert csv.splitlines()[0] == "N,h,L2,L2_rate"
    assert csv.splitlines()[1] == "4,2.500000e-01,1.000000e-02,"
    assert csv.splitlines()[2].endswith("2.000000e+00")
    assert t.to_csv() == csv
    with pytest.raises(ValueError):
        RateTable("x", "N", [1, 2], [0.5, 0.5], {})


def test_run_convergence_requires_three_levels():
    with pytest.raises(ValueError):
        run_convergence("mms_network", [0.5, 0.25])
    with pytest.raises(ValueError, match="unknown study"):
        run_convergence("nope", [1, 2, 3])


def test_network_study_smoke():
    t = run_convergence("mms_network", [0.5, 0.25, 0.125, 0.0625])
    assert t.levels == [0.5, 0.25, 0.125, 0.0625]
    r = t.rates("dg")
    assert 0.8 < r[-1] < 1.2
