"""ASCII OBJ export: ``v`` and ``f`` records with 1-based indices.

Body attachments are written as comment lines ``# attach i j`` (garment
vertex i, body vertex j, both 0-based), which other OBJ readers ignore.
"""

from __future__ import annotations

import os

import numpy as np

from app.errors import ValidationError
from app.models import Mesh
from app.storage import require_file


def save_obj(path: str, mesh: Mesh) -> None:
    lines = [f"v {x:.9f} {y:.9f} {z:.9f}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    if mesh.attachment is not None:
        lines += [f"# attach {i} {j}" for i, j in enumerate(mesh.attachment)]
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write("\n".join(lines))
        f.write("\n")
    os.replace(tmp, path)


def load_obj(path: str) -> Mesh:
    require_file(path)
    verts, faces, attach = [], [], {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(v) for v in parts[1:4]])
                elif parts[0] == "f":
                    # keep only the vertex index of "v/vt/vn" forms
                    faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
                elif parts[:2] == ["#", "attach"]:
                    attach[int(parts[2])] = int(parts[3])
            except (ValueError, IndexError) as e:
                raise ValidationError(f"{path}:{lineno}: malformed OBJ record") from e
    attachment = None
    if attach:
        if sorted(attach) != list(range(len(verts))):
            raise ValidationError(f"{path}: attachment block does not cover every vertex")
        attachment = np.array([attach[i] for i in range(len(verts))], dtype=np.int64)
    return Mesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3),
                attachment)
