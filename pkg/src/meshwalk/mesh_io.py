"""Mesh export/import: binary little-endian PLY and OBJ with vertex colors."""

import numpy as np

from .mesh import SceneMesh

_VERTEX_DTYPE = np.dtype([
    ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
    ("red", "u1"), ("green", "u1"), ("blue", "u1"),
])
_FACE_DTYPE = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])


def save_ply(mesh: SceneMesh, path):
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {mesh.num_vertices}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        f"element face {mesh.num_faces}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    verts = np.empty(mesh.num_vertices, dtype=_VERTEX_DTYPE)
    pos = mesh.positions.astype(np.float32)
    rgb = np.clip(np.round(mesh.colors * 255.0), 0, 255).astype(np.uint8)
    verts["x"], verts["y"], verts["z"] = pos[:, 0], pos[:, 1], pos[:, 2]
    verts["red"], verts["green"], verts["blue"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    faces = np.empty(mesh.num_faces, dtype=_FACE_DTYPE)
    faces["n"] = 3
    faces["idx"] = mesh.faces.astype(np.int32)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(verts.tobytes())
        fh.write(faces.tobytes())


def load_ply(path):
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"end_header\n")
    if end < 0:
        raise ValueError(f"{path}: not a PLY file")
    header = data[:end].decode("ascii").splitlines()
    if header[0].strip() != "ply" or "format binary_little_endian 1.0" not in header[1]:
        raise ValueError(f"{path}: unsupported PLY flavor")
    nv = nf = None
    for line in header:
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            nv = int(parts[2])
        elif parts[:2] == ["element", "face"]:
            nf = int(parts[2])
    if nv is None or nf is None:
        raise ValueError(f"{path}: missing element counts")
    body = data[end + len(b"end_header\n"):]
    verts = np.frombuffer(body, dtype=_VERTEX_DTYPE, count=nv)
    faces = np.frombuffer(body[nv * _VERTEX_DTYPE.itemsize:], dtype=_FACE_DTYPE, count=nf)
    positions = np.stack([verts["x"], verts["y"], verts["z"]], axis=1).astype(np.float64)
    colors = np.stack([verts["red"], verts["green"], verts["blue"]], axis=1) / 255.0
    return SceneMesh(positions, colors, faces["idx"].astype(np.int32))


def save_obj(mesh: SceneMesh, path):
    """OBJ with the common per-vertex color extension (r g b after x y z)."""
    with open(path, "w") as fh:
        for p, c in zip(mesh.positions, mesh.colors):
            fh.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g} "
                     f"{c[0]:.6g} {c[1]:.6g} {c[2]:.6g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def load_obj(path):
    positions, colors, faces = [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vals = [float(x) for x in parts[1:]]
                positions.append(vals[:3])
                colors.append(vals[3:6] if len(vals) >= 6 else [1.0, 1.0, 1.0])
            elif parts[0] == "f":
                faces.append([int(tok.split("/")[0]) - 1 for tok in parts[1:4]])
    return SceneMesh(np.array(positions, dtype=np.float64).reshape(-1, 3),
                     np.array(colors, dtype=np.float64).reshape(-1, 3),
                     np.array(faces, dtype=np.int32).reshape(-1, 3))


def save_mesh(mesh, path, fmt=None):
    fmt = fmt or str(path).rsplit(".", 1)[-1].lower()
    if fmt == "ply":
        save_ply(mesh, path)
    elif fmt == "obj":
        save_obj(mesh, path)
    else:
        raise ValueError(f"unknown mesh format {fmt!r}")


def load_mesh(path, fmt=None):
    fmt = fmt or str(path).rsplit(".", 1)[-1].lower()
    if fmt == "ply":
        return load_ply(path)
    if fmt == "obj":
        return load_obj(path)
    raise ValueError(f"unknown mesh format {fmt!r}")
