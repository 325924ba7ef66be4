"""Point clouds and PLY files.

Clouds are written as binary little-endian PLY with float32 ``x y z`` and an
optional int32 ``label`` property.  The reader also handles ASCII PLY and
triangle meshes (``element face`` with a ``vertex_indices`` list).
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


@dataclass(eq=False)
class PointCloud:
    """(N, 3) world-frame points with optional per-point integer labels."""

    points: np.ndarray
    labels: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if len(self.labels) != len(self.points):
                raise ValueError("labels must match point count")

    def __len__(self):
        return len(self.points)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)))

    def subset(self, mask):
        return PointCloud(self.points[mask], None if self.labels is None else self.labels[mask])


def write_cloud_ply(path, cloud):
    n = len(cloud)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}",
              "property float x", "property float y", "property float z"]
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if cloud.labels is not None:
        header.append("property int label")
        fields.append(("label", "<i4"))
    header.append("end_header")
    rec = np.empty(n, dtype=fields)
    rec["x"], rec["y"], rec["z"] = cloud.points.T.astype(np.float32)
    if cloud.labels is not None:
        rec["label"] = cloud.labels.astype(np.int32)
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(rec.tobytes())


def _parse_header(fh):
    if fh.readline().strip() != b"ply":
        raise ValueError("not a PLY file")
    fmt, elements = None, []
    while True:
        line = fh.readline()
        if not line:
            raise ValueError("truncated PLY header")
        tok = line.decode("ascii").split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append({"name": tok[1], "count": int(tok[2]), "props": []})
        elif tok[0] == "property":
            if tok[1] == "list":
                elements[-1]["props"].append((tok[4], "list", tok[2], tok[3]))
            else:
                elements[-1]["props"].append((tok[2], tok[1]))
        elif tok[0] == "end_header":
            return fmt, elements


def _read_elements(path):
    with open(path, "rb") as fh:
        fmt, elements = _parse_header(fh)
        body = fh.read()
    out = {}
    if fmt == "ascii":
        tokens = iter(body.decode("ascii").split())
        for el in elements:
            rows = []
            for _ in range(el["count"]):
                row = {}
                for prop in el["props"]:
                    if prop[1] == "list":
                        k = int(next(tokens))
                        row[prop[0]] = [float(next(tokens)) for _ in range(k)]
                    else:
                        row[prop[0]] = float(next(tokens))
                rows.append(row)
            out[el["name"]] = rows
        return "ascii", out
    if fmt not in ("binary_little_endian", "binary_big_endian"):
        raise ValueError(f"unsupported PLY format {fmt}")
    endian = "<" if fmt == "binary_little_endian" else ">"
    offset = 0
    for el in elements:
        if all(p[1] != "list" for p in el["props"]):
            dt = np.dtype([(p[0], endian + _PLY_TYPES[p[1]]) for p in el["props"]])
            arr = np.frombuffer(body, dtype=dt, count=el["count"], offset=offset)
            offset += dt.itemsize * el["count"]
            out[el["name"]] = arr
        else:
            rows = []
            for _ in range(el["count"]):
                row = {}
                for p in el["props"]:
                    if p[1] == "list":
                        cdt = np.dtype(endian + _PLY_TYPES[p[2]])
                        k = int(np.frombuffer(body, cdt, 1, offset)[0])
                        offset += cdt.itemsize
                        idt = np.dtype(endian + _PLY_TYPES[p[3]])
                        row[p[0]] = np.frombuffer(body, idt, k, offset).tolist()
                        offset += idt.itemsize * k
                    else:
                        vdt = np.dtype(endian + _PLY_TYPES[p[1]])
                        row[p[0]] = np.frombuffer(body, vdt, 1, offset)[0]
                        offset += vdt.itemsize
                rows.append(row)
            out[el["name"]] = rows
    return fmt, out


def _column(vertex, name):
    if isinstance(vertex, np.ndarray):
        return vertex[name].astype(float) if name in vertex.dtype.names else None
    if vertex and name in vertex[0]:
        return np.array([row[name] for row in vertex], dtype=float)
    return None


def read_cloud_ply(path):
    _, els = _read_elements(path)
    v = els.get("vertex", [])
    if len(v) == 0:
        return PointCloud.empty()
    pts = np.column_stack([_column(v, "x"), _column(v, "y"), _column(v, "z")])
    lab = _column(v, "label")
    return PointCloud(pts, None if lab is None else lab.astype(np.int64))


def read_mesh_ply(path):
    _, els = _read_elements(Path(path))
    v = els["vertex"]
    verts = np.column_stack([_column(v, "x"), _column(v, "y"), _column(v, "z")])
    faces = []
    for row in els.get("face", []):
        idx = row.get("vertex_indices", row.get("vertex_index"))
        idx = [int(i) for i in idx]
        for k in range(1, len(idx) - 1):
            faces.append([idx[0], idx[k], idx[k + 1]])
    return verts, np.array(faces, dtype=np.int64)


def write_mesh_ply(path, vertices, faces):
    lines = ["ply", "format ascii 1.0", f"element vertex {len(vertices)}",
             "property float x", "property float y", "property float z",
             f"element face {len(faces)}", "property list uchar int vertex_indices", "end_header"]
    lines += [" ".join(repr(float(c)) for c in v) for v in vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in f) for f in faces]
    Path(path).write_text("\n".join(lines) + "\n")
