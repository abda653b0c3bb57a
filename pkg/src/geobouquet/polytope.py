"""Convex polytopes in half-space representation.

A polytope is the intersection of finitely many closed half-spaces
``{x : x . n_j <= c_j}`` with unit outward normals.  Vertices are derived
on demand by a combinatorial sweep, which is fine for the small instances
used here (a few dozen half-spaces in dimension <= 6).
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError, NotCompact

FACE_TOL = 1e-9
DUPLICATE_TOL = 1e-10


@dataclass(frozen=True)
class HalfSpace:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if not np.isfinite(norm) or norm == 0:
            raise DomainError("half-space normal must be nonzero and finite")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "offset", float(self.offset) / norm)


class Where(enum.Enum):
    INTERIOR = "Interior"
    FACE = "BoundaryFace"
    SKELETON = "BoundarySkeleton"
    OUTSIDE = "Outside"


class Membership(NamedTuple):
    kind: Where
    face: int | None = None

    def __str__(self):
        if self.kind is Where.FACE:
            return f"BoundaryFace({self.face})"
        return self.kind.value


class Polytope:
    """Intersection of half-spaces with unit outward normals.

    Parameters
    ----------
    normals : (m, n) array_like
        Outward normals; rescaled to unit length together with the offsets.
    offsets : (m,) array_like
        Right-hand sides, so the polytope is ``normals @ x <= offsets``.

    Raises
    ------
    DomainError
        On duplicate half-spaces (same outward normal up to 1e-10) or when
        the intersection has empty interior.
    """

    def __init__(self, normals, offsets):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = np.asarray(offsets, dtype=float).reshape(-1)
        if normals.shape[0] != offsets.shape[0]:
            raise DomainError("normals and offsets differ in length")
        if not (np.all(np.isfinite(normals)) and np.all(np.isfinite(offsets))):
            raise DomainError("non-finite half-space data")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms == 0):
            raise DomainError("zero normal")
        self.normals = normals / norms[:, None]
        self.offsets = offsets / norms
        self.normals.setflags(write=False)
        self.offsets.setflags(write=False)
        self.dim = self.normals.shape[1]
        for i, j in itertools.combinations(range(len(self.offsets)), 2):
            if np.max(np.abs(self.normals[i] - self.normals[j])) <= DUPLICATE_TOL:
                raise DomainError(f"half-spaces {i} and {j} have the same outward normal")
        center, radius = self.chebyshev_center()
        if not radius > 0:
            raise DomainError("polytope has empty interior")

    @classmethod
    def from_halfspaces(cls, halfspaces):
        hs = list(halfspaces)
        return cls([h.normal for h in hs], [h.offset for h in hs])

    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        eye = np.eye(lower.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    @property
    def halfspaces(self):
        return [HalfSpace(n, c) for n, c in zip(self.normals, self.offsets)]

    @property
    def n_faces(self) -> int:
        return len(self.offsets)

    def __len__(self):
        return self.n_faces

    def __repr__(self):
        return f"Polytope(dim={self.dim}, halfspaces={self.n_faces})"

    # -- membership ---------------------------------------------------------

    def slacks(self, x) -> np.ndarray:
        """``c_j - x . n_j`` for every constraint (positive inside)."""
        return self.offsets - self.normals @ np.asarray(x, dtype=float)

    def contains(self, x, tol=FACE_TOL) -> Membership:
        s = self.slacks(x)
        if np.any(s < -tol):
            return Membership(Where.OUTSIDE)
        active = np.flatnonzero(np.abs(s) <= tol)
        if active.size == 0:
            return Membership(Where.INTERIOR)
        if active.size == 1:
            return Membership(Where.FACE, int(active[0]))
        return Membership(Where.SKELETON)

    def is_interior(self, x, tol=FACE_TOL) -> bool:
        return self.contains(x, tol).kind is Where.INTERIOR

    # -- reflections --------------------------------------------------------

    def reflection_matrix(self, face: int) -> np.ndarray:
        n = self.normals[face]
        return np.eye(self.dim) - 2.0 * np.outer(n, n)

    def reflect_dir(self, face: int, u) -> np.ndarray:
        n = self.normals[face]
        u = np.asarray(u, dtype=float)
        return u - 2.0 * (u @ n) * n

    def reflect_point(self, face: int, x) -> np.ndarray:
        n = self.normals[face]
        x = np.asarray(x, dtype=float)
        return x - 2.0 * (x @ n - self.offsets[face]) * n

    # -- LP helpers ---------------------------------------------------------

    def chebyshev_center(self, radius_cap=1.0):
        """Center and radius of a largest inscribed ball (radius capped).

        The cap keeps the LP bounded for unbounded polytopes; only the
        sign of the radius matters for the interior test.
        """
        m, n = self.normals.shape
        c = np.zeros(n + 1)
        c[-1] = -1.0
        a = np.hstack([self.normals, np.ones((m, 1))])
        bounds = [(None, None)] * n + [(None, radius_cap)]
        res = linprog(c, A_ub=a, b_ub=self.offsets, bounds=bounds, method="highs")
        if res.status != 0:
            return None, -np.inf
        return res.x[:n], float(res.x[-1])

    def is_compact(self, tol=FACE_TOL) -> bool:
        """True iff the recession cone ``{d : N d <= 0}`` is trivial.

        A fixed set of sample directions is screened first; the decision is
        made by maximizing each coordinate of ``+-d`` over the cone
        intersected with the unit box (2n small LPs).
        """
        n = self.dim
        for d in _sample_directions(n):
            if np.all(self.normals @ d <= 0):
                return False
        for k in range(n):
            for sign in (1.0, -1.0):
                c = np.zeros(n)
                c[k] = -sign
                res = linprog(c, A_ub=self.normals, b_ub=np.zeros(self.n_faces),
                              bounds=[(-1, 1)] * n, method="highs")
                if res.status == 0 and -res.fun > tol:
                    return False
        return True

    # -- vertices -----------------------------------------------------------

    @cached_property
    def _vertex_data(self):
        if not self.is_compact():
            raise NotCompact("polytope is unbounded")
        n = self.dim
        verts: list[np.ndarray] = []
        incidence: list[frozenset] = []
        for combo in itertools.combinations(range(self.n_faces), n):
            a = self.normals[list(combo)]
            if abs(np.linalg.det(a)) < 1e-12:
                continue
            x = np.linalg.solve(a, self.offsets[list(combo)])
            s = self.slacks(x)
            if np.any(s < -FACE_TOL):
                continue
            if any(np.max(np.abs(x - v)) <= FACE_TOL for v in verts):
                continue
            verts.append(x)
            incidence.append(frozenset(np.flatnonzero(np.abs(s) <= FACE_TOL).tolist()))
        return np.array(verts).reshape(-1, n), incidence

    def enumerate_vertices(self) -> np.ndarray:
        """All vertices, shape (v, n).  Raises NotCompact when unbounded."""
        return self._vertex_data[0].copy()

    @property
    def vertices(self) -> np.ndarray:
        return self.enumerate_vertices()

    @property
    def face_adjacency(self) -> list:
        """For each vertex, the set of half-space indices active there."""
        return list(self._vertex_data[1])

    def facet_indices(self) -> list[int]:
        """Indices of half-spaces whose boundary meets the polytope in a facet."""
        out = []
        for j in range(self.n_faces):
            verts = [v for v, inc in zip(*self._vertex_data) if j in inc]
            if len(verts) >= self.dim:
                span = np.array(verts[1:]) - verts[0]
                if np.linalg.matrix_rank(span, tol=1e-9) == self.dim - 1:
                    out.append(j)
        return out

    def bounding_box(self):
        v = self.vertices
        return v.min(axis=0), v.max(axis=0)

    # -- transforms ---------------------------------------------------------

    def transformed(self, rotation=None, shift=None, scale=1.0) -> "Polytope":
        """Image under ``x -> scale * R x + shift``."""
        r = np.eye(self.dim) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.zeros(self.dim) if shift is None else np.asarray(shift, dtype=float)
        normals = self.normals @ r.T
        offsets = scale * self.offsets + normals @ t
        return Polytope(normals, offsets)

    def same_as(self, other: "Polytope", tol=1e-10) -> bool:
        """Equality as sets of half-spaces, ignoring order."""
        if self.dim != other.dim or self.n_faces != other.n_faces:
            return False
        used = set()
        for n, c in zip(self.normals, self.offsets):
            hit = None
            for j, (n2, c2) in enumerate(zip(other.normals, other.offsets)):
                if j not in used and np.max(np.abs(n - n2)) <= tol and abs(c - c2) <= tol:
                    hit = j
                    break
            if hit is None:
                return False
            used.add(hit)
        return True

    # -- serialization ------------------------------------------------------

    def to_json(self):
        return {"dim": self.dim,
                "halfspaces": [{"normal": n.tolist(), "offset": float(c)}
                               for n, c in zip(self.normals, self.offsets)]}

    @classmethod
    def from_json(cls, data):
        hs = data["halfspaces"]
        p = cls([h["normal"] for h in hs], [h["offset"] for h in hs])
        if int(data.get("dim", p.dim)) != p.dim:
            raise DomainError("declared dim does not match the normals")
        return p


def _sample_directions(n, count=64):
    # deterministic quasi-uniform directions: axes, diagonals, then a seeded batch
    dirs = [e for e in np.eye(n)] + [-e for e in np.eye(n)]
    rng = np.random.default_rng(12345)
    g = rng.standard_normal((count, n))
    dirs.extend(g / np.linalg.norm(g, axis=1, keepdims=True))
    return dirs
