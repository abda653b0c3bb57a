"""Linear subspaces stored by orthonormal bases.

Everything here is small and dense: nullspaces via the SVD, intersections
via stacked complement projectors, principal angles, and rotations in an
oriented 2-plane.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from .errors import DomainError, RankAmbiguous

ABS_FLOOR = 1e-10
REL_TOL = 1e-8
GAP_LIMIT = 0.5
EQUAL_ANGLE = 1e-9


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace of R^ambient_dim with orthonormal basis rows."""

    ambient_dim: int
    basis: np.ndarray  # shape (dim, ambient_dim)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float).reshape(-1, self.ambient_dim)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        if b.shape[0] > self.ambient_dim:
            raise DomainError("more basis vectors than the ambient dimension")
        gram = b @ b.T
        if not np.allclose(gram, np.eye(b.shape[0]), atol=1e-12, rtol=0):
            raise DomainError("basis is not orthonormal")

    @classmethod
    def span(cls, vectors, ambient_dim=None, rel_tol=REL_TOL):
        """Orthonormal basis for the span of the given vectors (rows)."""
        v = np.asarray(vectors, dtype=float)
        if ambient_dim is None:
            ambient_dim = v.shape[-1]
        v = v.reshape(-1, ambient_dim)
        if v.shape[0] == 0:
            return cls.zero(ambient_dim)
        _, s, vt = np.linalg.svd(v, full_matrices=False)
        cut = max(ABS_FLOOR, rel_tol * s[0]) if s.size else 0.0
        rank = int(np.sum(s > cut))
        if rank == v.shape[0]:
            # independent input: keep its order (Gram-Schmidt via QR)
            return cls(ambient_dim, _clean(v))
        return cls(ambient_dim, _clean(vt[:rank]))

    @classmethod
    def zero(cls, ambient_dim):
        return cls(ambient_dim, np.zeros((0, ambient_dim)))

    @classmethod
    def full(cls, ambient_dim):
        return cls(ambient_dim, np.eye(ambient_dim))

    @classmethod
    def orthogonal_to(cls, vector):
        """The hyperplane orthogonal to a nonzero vector."""
        v = np.asarray(vector, dtype=float)
        if np.linalg.norm(v) == 0:
            raise DomainError("zero normal vector")
        return cls.span([v]).complement()

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """Basis vectors as columns, shape (ambient_dim, dim)."""
        return self.basis.T

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def complement(self) -> "Subspace":
        n = self.ambient_dim
        if self.dim == 0:
            return Subspace.full(n)
        if self.dim == n:
            return Subspace.zero(n)
        q, _ = np.linalg.qr(np.hstack([self.basis.T, np.eye(n)]))
        return Subspace(n, _clean(q[:, self.dim:n].T))

    def residual(self, vector) -> float:
        """Norm of the component of vector orthogonal to the subspace."""
        v = np.asarray(vector, dtype=float)
        return float(np.linalg.norm(v - self.projector() @ v))

    def contains(self, vector, tol=1e-10) -> bool:
        return self.residual(vector) <= tol * max(1.0, np.linalg.norm(vector))

    def principal_angles(self, other: "Subspace") -> np.ndarray:
        """Principal angles in increasing order (empty if either is zero)."""
        _check_ambient(self, other)
        if self.dim == 0 or other.dim == 0:
            return np.zeros(0)
        return np.sort(subspace_angles(self.matrix, other.matrix))

    def max_angle(self, other: "Subspace") -> float:
        """Largest principal angle; pi/2 when the dimensions differ."""
        if self.dim != other.dim:
            return float(np.pi / 2)
        a = self.principal_angles(other)
        return float(a.max()) if a.size else 0.0

    def equals(self, other: "Subspace", tol=EQUAL_ANGLE) -> bool:
        return self.dim == other.dim and self.max_angle(other) < tol

    def direct_sum(self, other: "Subspace") -> "Subspace":
        _check_ambient(self, other)
        return Subspace.span(np.vstack([self.basis, other.basis]), self.ambient_dim)

    def transformed(self, matrix) -> "Subspace":
        """Image under an invertible linear map."""
        m = np.asarray(matrix, dtype=float)
        return Subspace.span((m @ self.basis.T).T, m.shape[0])

    def to_json(self):
        return {"ambient_dim": self.ambient_dim, "basis": self.basis.tolist()}

    @classmethod
    def from_json(cls, data):
        return cls(int(data["ambient_dim"]), np.asarray(data["basis"], dtype=float))

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def _clean(rows):
    # Re-orthonormalize rows from an SVD/QR so the 1e-12 invariant holds.
    rows = np.atleast_2d(rows)
    if rows.shape[0] == 0:
        return rows
    q, r = np.linalg.qr(rows.T)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return (q * signs).T


def _check_ambient(*spaces):
    dims = {s.ambient_dim for s in spaces}
    if len(dims) != 1:
        raise DomainError(f"ambient dimensions differ: {sorted(dims)}")


@dataclass(frozen=True)
class NullspaceResult:
    subspace: Subspace
    gap_ratio: float
    singular_values: np.ndarray
    cut: float


def nullspace_report(matrix, rel_tol=REL_TOL, abs_floor=ABS_FLOOR) -> NullspaceResult:
    """Numerical nullspace with the diagnostics behind the rank decision.

    Singular values at or below ``max(abs_floor, rel_tol * sigma_max)`` are
    treated as zero.  The gap ratio is the largest of those divided by the
    smallest value kept as nonzero (0 when either group is empty).
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise DomainError("nullspace expects a 2-D matrix")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    if not 0 < rel_tol < 1:
        raise DomainError("rel_tol must lie in (0, 1)")
    m, n = a.shape
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    cut = max(abs_floor, rel_tol * smax)
    # pad so that each row of vt has a singular value (missing ones are zero)
    sv = np.zeros(n)
    sv[: s.size] = s
    zero = sv <= cut
    small = sv[zero]
    large = sv[~zero]
    if small.size and large.size:
        gap = float(small.max() / large.min())
    else:
        gap = 0.0
    if gap > GAP_LIMIT:
        raise RankAmbiguous(
            f"singular values not separated at cut {cut:.3e} (gap ratio {gap:.3f})",
            gap_ratio=gap, singular_values=sv)
    return NullspaceResult(Subspace(n, _clean(vt[zero])), gap, sv, cut)


def nullspace(matrix, rel_tol=REL_TOL) -> Subspace:
    """Right nullspace of a matrix, see :func:`nullspace_report`."""
    return nullspace_report(matrix, rel_tol).subspace


def intersect_report(subspaces, rel_tol=REL_TOL):
    """Intersection of subspaces and its triviality margin.

    The intersection is the nullspace of the stacked projectors onto the
    orthogonal complements.  The margin is the smallest singular value of
    that stack; it is bounded away from zero exactly when the intersection
    is trivial.
    """
    spaces = list(subspaces)
    if not spaces:
        raise DomainError("need at least one subspace")
    _check_ambient(*spaces)
    n = spaces[0].ambient_dim
    stack = np.vstack([np.eye(n) - s.projector() for s in spaces])
    res = nullspace_report(stack, rel_tol)
    margin = float(np.linalg.svd(stack, compute_uv=False)[-1])
    return res.subspace, margin


def intersect(subspaces, rel_tol=REL_TOL) -> Subspace:
    return intersect_report(subspaces, rel_tol)[0]


@dataclass(frozen=True)
class Rotation2Plane:
    """Rotation by ``angle`` in an oriented 2-plane, identity off the plane.

    The orientation is that of the plane's ordered basis: the first basis
    vector turns towards the second for positive angles.
    """

    plane: Subspace
    angle: float

    def __post_init__(self):
        if self.plane.dim != 2:
            raise DomainError("rotation plane must be 2-dimensional")

    def matrix(self) -> np.ndarray:
        e1, e2 = self.plane.basis
        c, s = np.cos(self.angle), np.sin(self.angle)
        n = self.plane.ambient_dim
        return (np.eye(n) + (c - 1.0) * (np.outer(e1, e1) + np.outer(e2, e2))
                + s * (np.outer(e2, e1) - np.outer(e1, e2)))


def rotate_halfspace_normal(normal, plane: Subspace, angle: float) -> np.ndarray:
    """Rotate a unit normal lying in ``plane`` by ``angle`` within it."""
    nrm = np.asarray(normal, dtype=float)
    if plane.residual(nrm) >= 1e-10:
        raise DomainError("normal does not lie in the rotation plane")
    out = Rotation2Plane(plane, angle).matrix() @ nrm
    return out / np.linalg.norm(out)
