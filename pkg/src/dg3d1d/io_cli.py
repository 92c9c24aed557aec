"""File formats: vessel networks (JSON), legacy ASCII VTK, rate tables, reports
and flat key=value run configurations."""

import json
import math
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import Dg3d1dError, InvalidArgumentError, NetworkFormatError
from .network1d import VesselGraph

VTK_HEADER = "# vtk DataFile Version 3.0"
VTK_TETRA = 10
VTK_LINE = 3


# -- networks ---------------------------------------------------------------

def _require(obj, key, path, kind):
    if not isinstance(obj, dict) or key not in obj:
        raise NetworkFormatError(path, f"missing field {key!r}")
    val = obj[key]
    ok = {
        "number": isinstance(val, (int, float)) and not isinstance(val, bool),
        "int": isinstance(val, int) and not isinstance(val, bool),
        "list": isinstance(val, list),
    }[kind]
    if not ok:
        raise NetworkFormatError(f"{path}.{key}", f"expected {kind}, got {type(val).__name__}")
    if kind == "number" and not math.isfinite(val):
        raise NetworkFormatError(f"{path}.{key}", "value is not finite")
    return val


def network_from_dict(doc):
    """Validate a network document and build the graph.

    Errors name the offending field with a JSON path such as ``edges[0].v1``.
    """
    if not isinstance(doc, dict):
        raise NetworkFormatError("$", "top level must be an object")
    verts = _require(doc, "vertices", "$", "list")
    edges = _require(doc, "edges", "$", "list")
    if not verts:
        raise NetworkFormatError("vertices", "no vertices")
    if not edges:
        raise NetworkFormatError("edges", "no edges")

    coords = np.zeros((len(verts), 3))
    seen = {}
    for i, v in enumerate(verts):
        p = f"vertices[{i}]"
        vid = _require(v, "id", p, "int")
        if vid in seen:
            raise NetworkFormatError(f"{p}.id", f"duplicate id {vid}")
        if not 0 <= vid < len(verts):
            raise NetworkFormatError(f"{p}.id", f"ids must be dense 0..{len(verts) - 1}, got {vid}")
        seen[vid] = i
        coords[vid] = [_require(v, k, p, "number") for k in ("x", "y", "z")]

    nv = len(verts)
    conn = np.zeros((len(edges), 2), dtype=np.int64)
    radius = np.zeros(len(edges))
    xi = np.zeros(len(edges))
    cells = np.zeros(len(edges), dtype=np.int64)
    has_cells = []
    for j, e in enumerate(edges):
        p = f"edges[{j}]"
        for c, key in enumerate(("v0", "v1")):
            vid = _require(e, key, p, "int")
            if not 0 <= vid < nv:
                raise NetworkFormatError(f"{p}.{key}", f"unknown vertex id {vid}")
            conn[j, c] = vid
        radius[j] = _require(e, "radius", p, "number")
        if radius[j] <= 0:
            raise NetworkFormatError(f"{p}.radius", "radius must be positive")
        xi[j] = _require(e, "xi", p, "number") if "xi" in e else 1.0
        if xi[j] < 0:
            raise NetworkFormatError(f"{p}.xi", "permeability must be non-negative")
        if "cells" in e:
            cells[j] = _require(e, "cells", p, "int")
            if cells[j] < 1:
                raise NetworkFormatError(f"{p}.cells", "cell count must be at least 1")
            has_cells.append(j)
    if has_cells and len(has_cells) != len(edges):
        missing = sorted(set(range(len(edges))) - set(has_cells))
        raise NetworkFormatError(f"edges[{missing[0]}].cells",
                                 "cells must be given for every edge or for none")
    try:
        return VesselGraph(coords, conn, radius, xi, cells if has_cells else None)
    except InvalidArgumentError as exc:
        raise NetworkFormatError("$", str(exc)) from exc


def network_to_dict(graph):
    doc = {
        "vertices": [{"id": i, "x": float(p[0]), "y": float(p[1]), "z": float(p[2])}
                     for i, p in enumerate(graph.vertices)],
        "edges": [],
    }
    for j, (a, b) in enumerate(graph.edges):
        e = {"v0": int(a), "v1": int(b), "radius": float(graph.radius[j]),
             "xi": float(graph.xi[j])}
        if graph.cells is not None:
            e["cells"] = int(graph.cells[j])
        doc["edges"].append(e)
    return doc


def read_network(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise NetworkFormatError(str(path), "file not found") from exc
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(str(path), f"invalid JSON ({exc.msg}, line {exc.lineno})") from exc
    try:
        return network_from_dict(doc)
    except NetworkFormatError as exc:
        raise NetworkFormatError(f"{path}:{exc.path}", str(exc).split(": ", 1)[-1]) from exc


def write_network(graph, path):
    with open(path, "w") as fh:
        json.dump(network_to_dict(graph), fh, indent=1)
        fh.write("\n")


# -- legacy VTK ---------------------------------------------------------------

def _fmt(a):
    return repr(float(a))


def _write_vtk(path, title, points, conn, ctype, data):
    points = np.asarray(points, dtype=float)
    lines = [VTK_HEADER, title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(points)} double"]
    lines += [" ".join(_fmt(c) for c in p) for p in points]
    npc = conn.shape[1]
    lines.append(f"CELLS {len(conn)} {len(conn) * (npc + 1)}")
    lines += [f"{npc} " + " ".join(str(int(i)) for i in c) for c in conn]
    lines.append(f"CELL_TYPES {len(conn)}")
    lines += [str(ctype)] * len(conn)
    lines.append(f"POINT_DATA {len(points)}")
    for name, vals in data.items():
        vals = np.asarray(vals, dtype=float)
        if vals.shape != (len(points),):
            raise InvalidArgumentError(f"field {name!r} has {vals.size} values for {len(points)} points")
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_fmt(v) for v in vals]
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_vtk_3d(path, mesh, field, name="u"):
    """Broken P1 field: every cell gets its own four points (values are cell-vertex DOFs)."""
    field = np.asarray(field, dtype=float)
    if field.shape != (4 * mesh.num_cells,):
        raise InvalidArgumentError(f"3D field has {field.size} values, expected {4 * mesh.num_cells}")
    pts = mesh.cell_coords.reshape(-1, 3)
    conn = np.arange(4 * mesh.num_cells).reshape(-1, 4)
    _write_vtk(path, "dg3d1d 3D field", pts, conn, VTK_TETRA, {name: field})


def write_vtk_1d(path, space1, field, name="u_hat"):
    """Broken P_k edge field as line segments between the Lagrange nodes of each interval."""
    field = np.asarray(field, dtype=float)
    if field.shape != (space1.ndofs,):
        raise InvalidArgumentError(f"1D field has {field.size} values, expected {space1.ndofs}")
    xref = np.linspace(0.0, 1.0, space1.nloc)
    pts, conn, vals = [], [], []
    base = 0
    for e in range(len(space1.meshes)):
        _, x = space1.points(e, xref)  # (N, nloc, 3)
        n = x.shape[0]
        pts.append(x.reshape(-1, 3))
        vals.append(field[space1.interval_dofs(e)].ravel())
        local = np.arange(n * space1.nloc).reshape(n, space1.nloc) + base
        conn.append(np.stack([local[:, :-1], local[:, 1:]], axis=-1).reshape(-1, 2))
        base += n * space1.nloc
    _write_vtk(path, "dg3d1d 1D field", np.concatenate(pts), np.concatenate(conn), VTK_LINE,
               {name: np.concatenate(vals)})


def read_vtk(path):
    """Parse the legacy ASCII subset written above.

    Returns a dict with ``points``, ``cells`` (list of index arrays),
    ``cell_types`` and ``point_data`` (name -> array).
    """
    with open(path) as fh:
        tokens = fh.read().split("\n")
    if not tokens or tokens[0].strip() != VTK_HEADER:
        raise ValueError(f"{path}: not a legacy VTK file")
    if tokens[2].strip() != "ASCII" or tokens[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise ValueError(f"{path}: only ASCII unstructured grids are supported")
    words = " ".join(tokens[4:]).split()
    out = {"point_data": {}}
    i = 0
    npts = 0
    while i < len(words):
        key = words[i]
        if key == "POINTS":
            npts = int(words[i + 1])
            vals = np.array(words[i + 3:i + 3 + 3 * npts], dtype=float)
            out["points"] = vals.reshape(npts, 3)
            i += 3 + 3 * npts
        elif key == "CELLS":
            ncells, size = int(words[i + 1]), int(words[i + 2])
            flat = np.array(words[i + 3:i + 3 + size], dtype=np.int64)
            cells, k = [], 0
            for _ in range(ncells):
                cells.append(flat[k + 1:k + 1 + flat[k]])
                k += flat[k] + 1
            out["cells"] = cells
            i += 3 + size
        elif key == "CELL_TYPES":
            n = int(words[i + 1])
            out["cell_types"] = np.array(words[i + 2:i + 2 + n], dtype=np.int64)
            i += 2 + n
        elif key == "POINT_DATA":
            i += 2
        elif key == "SCALARS":
            name = words[i + 1]
            has_ncomp = i + 3 < len(words) and words[i + 3].isdigit()
            ncomp = int(words[i + 3]) if has_ncomp else 1
            j = i + (4 if has_ncomp else 3)
            if words[j] == "LOOKUP_TABLE":
                j += 2
            out["point_data"][name] = np.array(words[j:j + npts * ncomp], dtype=float)
            i = j + npts * ncomp
        else:
            raise ValueError(f"{path}: unexpected keyword {key!r}")
    return out


# -- tables, reports, matrices ------------------------------------------------

def write_rates_csv(table, path):
    with open(path, "w", newline="") as fh:
        fh.write(table.to_csv())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if hasattr(obj, "as_dict"):
        return _jsonable(obj.as_dict())
    return obj


def write_report(path, report):
    with open(path, "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_matrix_market(path, A):
    """Debug export of an assembled matrix."""
    from scipy.io import mmwrite
    mmwrite(str(path), A)


# -- run configuration ------------------------------------------------------

@dataclass
class RunConfig:
    command: str = "mms3d"
    levels: str = ""
    n: int = 8  # 3D subdivisions per axis (solve, heat)
    h_lambda: float = None  # edge mesh size target; default 1/n
    circle_points: int = 16
    gauss_points: int = None
    eps1: int = -1
    eps2: int = -1
    sigma_omega: float = 30.0
    sigma_lambda: float = 30.0
    sigma_e: float = 10.0
    sigma_v: float = 10.0
    xi: float = None  # overrides per-edge permeability of a network file
    k2: int = 1
    tau: float = None
    final_time: float = 0.5
    decay: float = 4.0
    f_hat: float = 1.0
    padding: float = 0.1
    box: str = None  # "x0,y0,z0,x1,y1,z1" overrides the padded bounding box
    network: str = None
    tol: float = None  # 1e-10, or 1e-12 for the network study
    output: str = "out"
    seed: int = 0
    snapshot_every: int = 0
    export_matrix: bool = False

    def validate(self):
        def bad(msg):
            raise InvalidArgumentError(msg)
        for name in ("sigma_omega", "sigma_lambda", "sigma_e", "sigma_v", "tol", "final_time"):
            if getattr(self, name) is None and name == "tol":
                continue
            if not getattr(self, name) > 0:
                bad(f"{name} must be positive, got {getattr(self, name)}")
        if self.eps1 not in (-1, 0, 1) or self.eps2 not in (-1, 0, 1):
            bad("eps1 and eps2 must be -1, 0 or 1")
        if self.n < 1:
            bad(f"n must be at least 1, got {self.n}")
        if self.circle_points < 4 or self.circle_points % 2:
            bad(f"circle_points must be even and at least 4, got {self.circle_points}")
        if self.gauss_points is not None and self.gauss_points < 1:
            bad("gauss_points must be at least 1")
        if self.k2 not in (1, 2):
            bad(f"k2 must be 1 or 2, got {self.k2}")
        if self.h_lambda is not None and not self.h_lambda > 0:
            bad("h_lambda must be positive")
        if self.tau is not None and not self.tau > 0:
            bad("tau must be positive")
        if self.xi is not None and self.xi < 0:
            bad("xi must be non-negative")
        if self.padding < 0:
            bad("padding must be non-negative")
        if self.box is not None:
            self.box_bounds()
        if self.snapshot_every < 0:
            bad("snapshot_every must be non-negative")
        return self

    def box_bounds(self):
        try:
            vals = [float(v) for v in self.box.split(",")]
        except ValueError as exc:
            raise InvalidArgumentError(f"bad box {self.box!r}") from exc
        if len(vals) != 6:
            raise InvalidArgumentError("box needs six comma-separated numbers")
        lo, hi = np.array(vals[:3]), np.array(vals[3:])
        if np.any(hi <= lo):
            raise InvalidArgumentError(f"degenerate box {self.box!r}")
        return lo, hi

    def as_dict(self):
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_ALIASES = {"mesh_n": "n"}  # spelled like the command line flag


def coerce(key, raw):
    """Convert a string config value to the type of RunConfig field ``key``."""
    if key not in _FIELD_TYPES:
        raise InvalidArgumentError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[key]
    if isinstance(raw, str):
        raw = raw.strip()
        if raw.lower() in ("none", ""):
            return None
    try:
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            if str(raw).lower() in ("1", "true", "yes", "on"):
                return True
            if str(raw).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise InvalidArgumentError(f"bad value for {key}: {raw!r}") from exc
    return str(raw)


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment; keys may use - or _."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        key = _ALIASES.get(key, key)
        out[key] = coerce(key, val)
    return out


def write_config(path, cfg):
    with open(path, "w") as fh:
        for k, v in cfg.as_dict().items():
            fh.write(f"{k} = {v}\n")


def make_output_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise Dg3d1dError(f"cannot create output directory {path}: {exc.strerror}") from exc
    return path
