import json
import os
from pathlib import Path

import numpy as np
import pytest

from dg3d1d.cli import EXIT_CONFIG, EXIT_GEOMETRY, EXIT_SOLVER, build_parser, main, resolve_config
from dg3d1d.errors import InvalidArgumentError, NetworkFormatError
from dg3d1d.io_cli import (VTK_HEADER, RunConfig, coerce, network_from_dict, network_to_dict,
                           read_config, read_network, read_vtk, write_config, write_network,
                           write_vtk_1d, write_vtk_3d)
from dg3d1d.mesh3d import build_box_mesh, mesh_from_cells
from dg3d1d.network1d import build_edge_meshes
from dg3d1d.spaces import DgSpace1, DgSpace3
from dg3d1d.verify import MmsNetwork

TREE = Path(__file__).resolve().parents[1] / "data" / "paper_tree.json"


def _single_edge_doc():
    return {"vertices": [{"id": 0, "x": 0, "y": 0, "z": 0}, {"id": 1, "x": 0, "y": 0, "z": 1}],
            "edges": [{"v0": 0, "v1": 1, "radius": 0.05}]}


def test_network_round_trip(tmp_path):
    g = MmsNetwork().graph(xi=0.7)
    write_network(g, tmp_path / "n.json")
    h = read_network(tmp_path / "n.json")
    assert np.array_equal(h.vertices, g.vertices)
    assert np.array_equal(h.edges, g.edges)
    assert np.array_equal(h.radius, g.radius) and np.array_equal(h.xi, g.xi)
    assert network_to_dict(h) == network_to_dict(g)


def test_single_edge_defaults():
    g = network_from_dict(_single_edge_doc())
    assert g.num_edges == 1 and g.xi[0] == 1.0 and g.cells is None


def test_paper_tree_file():
    g = read_network(TREE)
    assert g.num_vertices == 8 and g.num_edges == 7


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d["edges"][0].update(v1=99), "edges[0].v1"),
    (lambda d: d["edges"][0].pop("radius"), "edges[0]"),
    (lambda d: d["edges"][0].update(radius=-1), "edges[0].radius"),
    (lambda d: d["edges"][0].update(radius="big"), "edges[0].radius"),
    (lambda d: d["edges"][0].update(xi=-0.1), "edges[0].xi"),
    (lambda d: d["vertices"][1].update(id=0), "vertices[1].id"),
    (lambda d: d["vertices"][1].update(id=5), "vertices[1].id"),
    (lambda d: d["vertices"][0].update(x=float("nan")), "vertices[0].x"),
    (lambda d: d.update(edges=[]), "edges"),
])
def test_network_errors_name_the_field(mutate, path):
    doc = _single_edge_doc()
    mutate(doc)
    with pytest.raises(NetworkFormatError) as info:
        network_from_dict(doc)
    assert info.value.path == path


def test_partial_cells_and_disconnected():
    doc = _single_edge_doc()
    doc["vertices"] += [{"id": 2, "x": 1, "y": 0, "z": 0}, {"id": 3, "x": 2, "y": 0, "z": 0}]
    doc["edges"].append({"v0": 2, "v1": 3, "radius": 0.05, "cells": 3})
    with pytest.raises(NetworkFormatError, match="every edge"):
        network_from_dict(doc)
    doc["edges"][0]["cells"] = 2
    with pytest.raises(NetworkFormatError, match="components"):
        network_from_dict(doc)


def test_read_network_file_errors(tmp_path):
    with pytest.raises(NetworkFormatError, match="not found"):
        read_network(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{oops")
    with pytest.raises(NetworkFormatError, match="invalid JSON"):
        read_network(tmp_path / "bad.json")


def test_vtk_single_tet(tmp_path):
    m = mesh_from_cells([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 1, 2, 3]])
    write_vtk_3d(tmp_path / "t.vtk", m, np.array([1.0, 2.0, 3.0, 4.0]))
    lines = (tmp_path / "t.vtk").read_text().splitlines()
    assert lines[0] == VTK_HEADER
    assert lines[2] == "ASCII" and lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert "POINTS 4 double" in lines
    assert "CELLS 1 5" in lines and "CELL_TYPES 1" in lines
    assert "SCALARS u double 1" in lines and "LOOKUP_TABLE default" in lines


def test_vtk_round_trip_exact(tmp_path, rng):
    m = build_box_mesh(2)
    sp3 = DgSpace3(m)
    u = rng.normal(size=sp3.ndofs) / 3.0
    write_vtk_3d(tmp_path / "u.vtk", m, u)
    d = read_vtk(tmp_path / "u.vtk")
    assert len(d["cells"]) == 48 and set(d["cell_types"]) == {10}
    assert np.array_equal(d["point_data"]["u"], u)
    assert np.array_equal(d["points"], m.cell_coords.reshape(-1, 3))

    g = MmsNetwork().graph()
    sp1 = DgSpace1(g, build_edge_meshes(g, h=0.3), 2)
    w = rng.normal(size=sp1.ndofs) * np.pi
    write_vtk_1d(tmp_path / "w.vtk", sp1, w)
    d = read_vtk(tmp_path / "w.vtk")
    assert np.array_equal(d["point_data"]["u_hat"], w)
    assert set(d["cell_types"]) == {3}


def test_vtk_size_mismatch(tmp_path):
    m = build_box_mesh(1)
    with pytest.raises(InvalidArgumentError):
        write_vtk_3d(tmp_path / "x.vtk", m, np.zeros(3))


def test_config_coercion_and_file(tmp_path):
    assert coerce("n", "12") == 12
    assert coerce("sigma_e", "2.5") == 2.5
    assert coerce("export_matrix", "yes") is True
    assert coerce("tau", "none") is None
    with pytest.raises(InvalidArgumentError):
        coerce("n", "x")
    with pytest.raises(InvalidArgumentError, match="unknown"):
        coerce("colour", "red")
    cfg = RunConfig(n=6, sigma_v=12.0)
    write_config(tmp_path / "c.cfg", cfg)
    back = read_config(tmp_path / "c.cfg")
    assert back["n"] == 6 and back["sigma_v"] == 12.0
    (tmp_path / "bad.cfg").write_text("just words\n")
    with pytest.raises(InvalidArgumentError, match="key = value"):
        read_config(tmp_path / "bad.cfg")


def test_config_precedence(tmp_path):
    (tmp_path / "c.cfg").write_text("mesh-n = 3  # comment\nsigma_omega = 40\ncircle_points = 8\n")
    args = build_parser().parse_args(["mms3d", "--config", str(tmp_path / "c.cfg"),
                                      "--sigma-omega", "50"])
    cfg = resolve_config(args)
    assert cfg.sigma_omega == 50.0  # flag beats file
    assert cfg.circle_points == 8  # file beats default
    assert cfg.sigma_e == 10.0 and cfg.tol == 1e-10 and cfg.levels == "4,8,16"


def test_validation_rejects_bad_values():
    with pytest.raises(InvalidArgumentError):
        RunConfig(circle_points=7).validate()
    with pytest.raises(InvalidArgumentError):
        RunConfig(box="0,0,0,1,1").validate()
    with pytest.raises(InvalidArgumentError):
        RunConfig(sigma_v=-1).validate()


def test_cli_config_error_leaves_no_output(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--network", str(tmp_path / "nope.json"), "-o", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert main(["mms3d", "--levels", "4,x", "-o", str(out)]) == EXIT_CONFIG
    assert main(["mms3d", "--circle-points", "5", "-o", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_cli_geometry_error(tmp_path):
    out = tmp_path / "g"
    code = main(["solve", "--network", str(TREE), "--box", "0,0,0,1,1,1", "--mesh-n", "2",
                 "-o", str(out)])
    assert code == EXIT_GEOMETRY
    rep = json.loads((out / "report.json").read_text())
    assert rep["exit_code"] == EXIT_GEOMETRY and "error" in rep
    assert not (out / "u3d.vtk").exists()


def test_cli_solver_error(tmp_path):
    out = tmp_path / "s"
    assert main(["mms3d", "--levels", "2,3,4", "--eps1", "1", "-o", str(out)]) == EXIT_SOLVER
    rep = json.loads((out / "report.json").read_text())
    assert "nonsymmetric" in rep["error"]


def test_cli_mms3d_rate_table(tmp_path):
    out = tmp_path / "m"
    assert main(["mms3d", "--levels", "2,3,4", "-o", str(out)]) == 0
    lines = (out / "rates.csv").read_text().splitlines()
    assert lines[0].split(",") == ["N", "h", "H1_3d", "H1_3d_rate", "L2_3d", "L2_3d_rate",
                                   "H1_1d", "H1_1d_rate", "L2_1d", "L2_1d_rate"]
    assert len(lines) == 4
    rep = json.loads((out / "report.json").read_text())
    assert rep["exit_code"] == 0 and rep["config"]["levels"] == "2,3,4"
    assert read_vtk(out / "u3d.vtk")["cell_types"].size == 6 * 64


def test_cli_network_and_matrix_export(tmp_path):
    out = tmp_path / "n"
    assert main(["mms-network", "--levels", "0.5,0.25,0.125", "--export-matrix", "-o", str(out)]) == 0
    assert (out / "system.mtx").exists()
    assert (out / "rates.csv").read_text().startswith("level_h,h,dg,dg_rate,flux,flux_rate")


def test_cli_solve_tree(tmp_path):
    out = tmp_path / "t"
    assert main(["solve", "--network", str(TREE), "--mesh-n", "4", "-o", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["exit_code"] == 0
    assert os.path.exists(out / "u1d.vtk")
