"""Parametric toy meshes (boxes and capped cylinders) used for fixtures,
demos, and the bundled 12-mesh toy set."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import TriMesh, save_obj

_BOX_FACES = [
    # two triangles per face, outward winding
    (0, 2, 1), (0, 3, 2),  # -z
    (4, 5, 6), (4, 6, 7),  # +z
    (0, 1, 5), (0, 5, 4),  # -y
    (2, 3, 7), (2, 7, 6),  # +y
    (1, 2, 6), (1, 6, 5),  # +x
    (3, 0, 4), (3, 4, 7),  # -x
]


def make_box(
    sx: float = 1.0, sy: float = 1.0, sz: float = 1.0, taper: float = 1.0
) -> TriMesh:
    """Axis-aligned box centered at the origin; `taper` scales the top face
    (taper < 1 gives a rectangular frustum)."""
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    tx, ty = hx * taper, hy * taper
    verts = np.array([
        [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
        [-tx, -ty, hz], [tx, -ty, hz], [tx, ty, hz], [-tx, ty, hz],
    ])
    return TriMesh(verts, np.array(_BOX_FACES))


def make_cylinder(
    radius: float = 0.5, height: float = 1.0, segments: int = 16, taper: float = 1.0
) -> TriMesh:
    """Closed n-gon prism along z, centered at the origin; `taper` scales the
    top ring radius (taper -> 0 approaches a cone)."""
    if segments < 3:
        raise ValueError("segments must be >= 3")
    ang = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    bottom = np.column_stack([radius * ring, np.full(segments, -height / 2.0)])
    top = np.column_stack([radius * taper * ring, np.full(segments, height / 2.0)])
    verts = np.vstack([bottom, top,
                       [[0.0, 0.0, -height / 2.0], [0.0, 0.0, height / 2.0]]])
    cb, ct = 2 * segments, 2 * segments + 1
    tris = []
    for k in range(segments):
        kn = (k + 1) % segments
        tris.append((k, kn, segments + k))            # side lower
        tris.append((kn, segments + kn, segments + k))  # side upper
        tris.append((kn, k, cb))                      # bottom cap
        tris.append((segments + k, segments + kn, ct))  # top cap
    return TriMesh(verts, np.array(tris))


def toy_shape_set() -> list[tuple[str, TriMesh]]:
    """The bundled 12-mesh toy set: 6 box-like frustums and 6 prisms/cones.

    Shapes differ in canonical geometry (taper, cross-section), not just
    aspect ratio, so they stay distinct after anisotropic unit-cube fitting.
    """
    shapes: list[tuple[str, TriMesh]] = []
    for taper in (1.0, 0.85, 0.7, 0.55, 0.4, 0.2):
        shapes.append(("box", make_box(1.0, 1.0, 1.0, taper=taper)))
    for segments, taper in [(16, 1.0), (8, 1.0), (5, 1.0), (6, 0.6),
                            (16, 0.3), (4, 0.8)]:
        shapes.append(("cylinder", make_cylinder(0.5, 1.0, segments, taper=taper)))
    return shapes


def write_toy_set(directory) -> list[Path]:
    """Materialize the toy set as OBJ files under one subdirectory per class."""
    directory = Path(directory)
    paths = []
    counters: dict[str, int] = {}
    for cls, mesh in toy_shape_set():
        idx = counters.get(cls, 0)
        counters[cls] = idx + 1
        sub = directory / cls
        sub.mkdir(parents=True, exist_ok=True)
        path = sub / f"{cls}_{idx:02d}.obj"
        save_obj(path, mesh)
        paths.append(path)
    return paths
