"""Triangle meshes of level sets in R^3 by marching cubes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage.measure import marching_cubes

from ..errors import DomainError, NotRegular
from .field import SmoothField

REGULAR_RATIO = 1e-3   # gradient floor relative to the median over the mesh


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    faces: np.ndarray
    level: float
    cell: float
    max_residual: float
    residual_tol: float
    min_gradient: float

    @property
    def n_edges(self) -> int:
        return len(mesh_edges(self.faces))

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - self.n_edges + len(self.faces)

    @property
    def watertight(self) -> bool:
        return is_watertight(self.faces)

    @property
    def genus(self) -> int:
        return (2 - self.euler_characteristic) // 2

    def summary(self):
        return {"vertices": len(self.vertices), "faces": len(self.faces),
                "edges": self.n_edges, "euler_characteristic": self.euler_characteristic,
                "watertight": self.watertight, "level": self.level, "cell": self.cell,
                "max_residual": self.max_residual, "residual_tol": self.residual_tol,
                "min_gradient": self.min_gradient}


def mesh_edges(faces):
    e = np.vstack([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def is_watertight(faces) -> bool:
    """Every undirected edge is shared by exactly two triangles."""
    e = np.vstack([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    return bool(np.all(counts == 2))


def _grid_values(field, axes):
    X, Y, Z = axes
    if isinstance(field, SmoothField):
        gx, gy = np.meshgrid(X, Y, indexing="ij")
        g = field.planar_value(np.column_stack([gx.ravel(), gy.ravel()])).reshape(gx.shape)
        return field.sigma ** 2 + g[:, :, None] + (Z * Z)[None, None, :]
    pts = np.stack(np.meshgrid(X, Y, Z, indexing="ij"), axis=-1).reshape(-1, 3)
    return np.asarray(field.values(pts)).reshape(len(X), len(Y), len(Z))


def default_bounds(field, level, pad=0.1):
    if isinstance(field, SmoothField):
        lo, hi = field.polytope.bounding_box()
        reach = np.sqrt(max(level, 0.0)) + pad
        return (np.append(lo - reach, -reach), np.append(hi + reach, reach))
    r = np.sqrt(max(level, 0.0)) + pad
    return (-np.full(3, r), np.full(3, r))


def extract_surface(field, level, resolution=64, bounds=None, regular_ratio=REGULAR_RATIO):
    """Marching-cubes mesh of ``{field = level}``, projected once onto the level set.

    ``resolution`` is the number of grid nodes along the longest box side.
    Raises NotRegular when a mesh vertex has a gradient far below the typical
    size (a critical point on the level), and DomainError when the level set
    reaches the grid boundary.
    """
    if field.dim != 3:
        raise DomainError("surface extraction needs ambient dimension 3")
    lo, hi = default_bounds(field, level) if bounds is None else map(np.asarray, bounds)
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    cell = float(np.max(hi - lo)) / (resolution - 1)
    counts = np.maximum(np.ceil((hi - lo) / cell).astype(int) + 1, 2)
    axes = [lo[k] + cell * np.arange(counts[k]) for k in range(3)]
    vol = _grid_values(field, axes)
    border = np.concatenate([vol[0].ravel(), vol[-1].ravel(), vol[:, 0].ravel(),
                             vol[:, -1].ravel(), vol[:, :, 0].ravel(), vol[:, :, -1].ravel()])
    if np.any(border <= level):
        raise DomainError("level set reaches the grid boundary; enlarge the bounds")
    verts, faces, _, _ = marching_cubes(vol, level=level, spacing=(cell, cell, cell))
    verts = verts + lo
    ev = field.evaluate(verts)
    grad = np.atleast_2d(ev.gradient)
    gn = np.linalg.norm(grad, axis=1)
    floor = regular_ratio * float(np.median(gn))
    if gn.min() <= floor:
        raise NotRegular(f"gradient {gn.min():.3e} on the level set (typical {np.median(gn):.3e})")
    # one Newton step along the gradient
    step = (np.asarray(ev.value) - level) / gn ** 2
    verts = verts - step[:, None] * grad
    resid = np.abs(np.asarray(field.evaluate(verts).value) - level)
    H = np.atleast_3d(ev.hessian)
    hess_scale = float(np.max(np.linalg.norm(H, ord=2, axis=(1, 2))))
    # the Newton residual is about |Hess| * (distance moved)^2 / 2
    tol = hess_scale * cell ** 2
    return SurfaceMesh(verts, faces.astype(np.int64), float(level), cell,
                       float(resid.max()), tol, float(gn.min()))
