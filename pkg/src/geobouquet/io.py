"""Serialization: deterministic JSON, atomic writes, run manifests, OBJ export."""
from __future__ import annotations

import enum
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

FLOAT_FORMAT = "%.17g"


def format_float(x: float) -> str:
    """Shortest-safe 17-significant-digit form that reads back as a float."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = FLOAT_FORMAT % x
    if not any(c in s for c in ".eEn"):
        s += ".0"
    return s


def dumps(obj, indent=2) -> str:
    """JSON text with every float written to 17 significant digits.

    Key order is preserved, so equal inputs give byte-identical output.
    """
    out = []
    _write(obj, out, 0, indent)
    out.append("\n")
    return "".join(out)


def _write(obj, out, level, indent):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, enum.Enum):
        obj = obj.value
    if hasattr(obj, "to_json") and not isinstance(obj, (dict, list, tuple)):
        obj = obj.to_json()
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _write(obj.tolist(), out, level, indent)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(pad + json.dumps(str(k)) + ": ")
            _write(v, out, level + 1, indent)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(v, (int, float, np.integer, np.floating, bool)) or v is None for v in obj):
            # flat numeric rows stay on one line
            parts = []
            for v in obj:
                buf = []
                _write(v, buf, level + 1, indent)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _write(v, out, level + 1, indent)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_json(path, obj):
    atomic_write(path, dumps(obj))


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """What is needed to reproduce a run.  Wall time is kept out of to_json."""

    command: list
    version: str
    input_hashes: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    wall_time: float | None = None

    def to_json(self):
        return {"command": list(self.command), "version": self.version,
                "input_hashes": self.input_hashes, "seeds": self.seeds,
                "tolerances": self.tolerances}


# -- OBJ ----------------------------------------------------------------------

def _pad3(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] > 3:
        raise ValueError("OBJ export supports at most three coordinates")
    if p.shape[-1] < 3:
        p = np.concatenate([p, np.zeros(p.shape[:-1] + (3 - p.shape[-1],))], axis=-1)
    return p


def obj_mesh(vertices, faces) -> str:
    lines = ["# triangle mesh"]
    lines += ["v " + " ".join(format_float(c) for c in v) for v in _pad3(vertices)]
    lines += ["f " + " ".join(str(int(i) + 1) for i in f) for f in faces]
    return "\n".join(lines) + "\n"


def obj_polylines(polylines, names=None) -> str:
    lines = ["# polylines"]
    offset = 0
    for k, pl in enumerate(polylines):
        pl = _pad3(pl)
        if names:
            lines.append(f"o {names[k]}")
        lines += ["v " + " ".join(format_float(c) for c in v) for v in pl]
        lines.append("l " + " ".join(str(offset + i + 1) for i in range(len(pl))))
        offset += len(pl)
    return "\n".join(lines) + "\n"


def read_obj(text):
    """Vertices, faces and polylines of an OBJ string (0-based indices)."""
    verts, faces, lines = [], [], []
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(c) for c in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(c.split("/")[0]) - 1 for c in parts[1:]])
        elif parts[0] == "l":
            lines.append([int(c) - 1 for c in parts[1:]])
    return np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3), lines
