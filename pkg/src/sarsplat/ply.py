"""Binary little-endian PLY I/O for scenes and plain point clouds.

Scene files carry one vertex per scatterer with 28 double-precision
properties (position, quaternion, log-scales, 16 SH coefficients, 2
extinction pre-activations), so round-trips are bit-exact.  Plain-point
exports (positions plus an optional weight) open in external viewers.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .scene import Scene
from .sh import SH_C0
from .validation import InvalidParameterError

SCENE_PROPERTIES = (
    ["x", "y", "z"]
    + ["qw", "qx", "qy", "qz"]
    + ["log_scale_x", "log_scale_y", "log_scale_z"]
    + [f"sh_{i}" for i in range(16)]
    + ["ke_forward_raw", "ke_backward_raw"]
)

_PLY_TYPES = {
    "double": "<f8", "float64": "<f8",
    "float": "<f4", "float32": "<f4",
    "int": "<i4", "int32": "<i4", "uint": "<u4",
    "short": "<i2", "ushort": "<u2",
    "char": "i1", "uchar": "u1", "int8": "i1", "uint8": "u1",
}


def _write_ply(path, names: list[str], columns: list[np.ndarray], comments: list[str]):
    n = len(columns[0]) if columns else 0
    header = ["ply", "format binary_little_endian 1.0"]
    header += [f"comment {c}" for c in comments]
    header.append(f"element vertex {n}")
    header += [f"property double {name}" for name in names]
    header.append("end_header")
    data = np.zeros(n, dtype=[(name, "<f8") for name in names])
    for name, col in zip(names, columns):
        data[name] = col
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(data.tobytes())


def _read_ply(path):
    """Parse a PLY vertex element; returns (structured array, comments)."""
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise InvalidParameterError(f"{path}: not a PLY file (malformed header)")
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[end + len(b"end_header\n"):]

    fmt = None
    n_vertex = None
    fields: list[tuple[str, str]] = []
    comments: list[str] = []
    in_vertex = False
    for line in header[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "comment":
            comments.append(line[len("comment "):])
        elif parts[0] == "element":
            if parts[1] == "vertex":
                n_vertex = int(parts[2])
                in_vertex = True
            else:
                raise InvalidParameterError(
                    f"{path}: unsupported element {parts[1]!r} (only vertex)"
                )
        elif parts[0] == "property" and in_vertex:
            if parts[1] == "list":
                raise InvalidParameterError(f"{path}: list properties unsupported")
            if parts[1] not in _PLY_TYPES:
                raise InvalidParameterError(f"{path}: unknown property type {parts[1]!r}")
            fields.append((parts[2], _PLY_TYPES[parts[1]]))
    if fmt not in ("binary_little_endian", "ascii"):
        raise InvalidParameterError(f"{path}: unsupported format {fmt!r}")
    if n_vertex is None:
        raise InvalidParameterError(f"{path}: no vertex element")

    dtype = np.dtype(fields)
    if fmt == "binary_little_endian":
        need = n_vertex * dtype.itemsize
        if len(body) < need:
            raise InvalidParameterError(f"{path}: truncated body")
        data = np.frombuffer(body[:need], dtype=dtype)
    else:
        rows = body.decode("ascii").split()
        k = len(fields)
        if len(rows) < n_vertex * k:
            raise InvalidParameterError(f"{path}: truncated body")
        arr = np.array(rows[: n_vertex * k], dtype=np.float64).reshape(n_vertex, k)
        data = np.zeros(n_vertex, dtype=dtype)
        for j, (name, _) in enumerate(fields):
            data[name] = arr[:, j]
    return data, comments


def save_scene(scene: Scene, path) -> None:
    """Write a scene as binary PLY; metadata rides in a JSON comment."""
    cols = (
        [scene.positions[:, i] for i in range(3)]
        + [scene.rotations[:, i] for i in range(4)]
        + [scene.log_scales[:, i] for i in range(3)]
        + [scene.sh_coeffs[:, i] for i in range(16)]
        + [scene.ke_raw[:, i] for i in range(2)]
    )
    comments = ["sarsplat scene v1"]
    if scene.metadata:
        comments.append("meta " + json.dumps(scene.metadata, sort_keys=True, default=str))
    _write_ply(path, SCENE_PROPERTIES, cols, comments)


def load_scene(path) -> Scene:
    """Read a scene PLY, requiring the full scatterer property set."""
    data, comments = _read_ply(path)
    names = set(data.dtype.names or ())
    missing = [p for p in SCENE_PROPERTIES if p not in names]
    if missing:
        raise InvalidParameterError(
            f"{path}: missing scene properties: {', '.join(missing)}"
        )
    n = len(data)
    meta = {}
    for c in comments:
        if c.startswith("meta "):
            try:
                meta = json.loads(c[len("meta "):])
            except json.JSONDecodeError:
                meta = {}

    def cols(names_):
        return np.column_stack([np.asarray(data[nm], dtype=np.float64) for nm in names_]) \
            if n else np.zeros((0, len(names_)))

    return Scene(
        positions=cols(["x", "y", "z"]),
        rotations=cols(["qw", "qx", "qy", "qz"]),
        log_scales=cols(["log_scale_x", "log_scale_y", "log_scale_z"]),
        sh_coeffs=cols([f"sh_{i}" for i in range(16)]),
        ke_raw=cols(["ke_forward_raw", "ke_backward_raw"]),
        metadata=meta,
    )


def save_point_cloud(points, path, weights=None) -> None:
    """Write a plain-point PLY (positions plus optional per-point weight)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    names = ["x", "y", "z"]
    cols = [points[:, 0], points[:, 1], points[:, 2]]
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if len(weights) != len(points):
            raise InvalidParameterError("weights length must match points")
        names.append("weight")
        cols.append(weights)
    _write_ply(path, names, cols, ["sarsplat points v1"])


def load_point_cloud(path):
    """Read x/y/z (and optional weight) from any vertex-only PLY.

    Returns:
        (points, weights) with weights None when absent.
    """
    data, _ = _read_ply(path)
    names = set(data.dtype.names or ())
    missing = [p for p in ("x", "y", "z") if p not in names]
    if missing:
        raise InvalidParameterError(f"{path}: missing point properties: {', '.join(missing)}")
    pts = np.column_stack(
        [np.asarray(data[nm], dtype=np.float64) for nm in ("x", "y", "z")]
    ) if len(data) else np.zeros((0, 3))
    weights = np.asarray(data["weight"], dtype=np.float64) if "weight" in names else None
    return pts, weights


def export_scene_points(scene: Scene, path) -> None:
    """Plain-point export of a scene: positions weighted by the DC phase term."""
    save_point_cloud(scene.positions, path, weights=np.maximum(scene.sh_coeffs[:, 0] * SH_C0, 0.0))
