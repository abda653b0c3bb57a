"""Geodesics in the double of a polytope, tracked through the base chart.

A geodesic in the double projects to a billiard trajectory and switches
sheet at every collision, so only the sheet parity has to be stored.
Tangent vectors are kept in the base chart; parallel transport along a
lifted trajectory is then the product of the face reflections.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .billiards import BilliardTrajectory, ValidationReport, validate
from .errors import DomainError
from .polytope import FACE_TOL, Polytope


@dataclass(frozen=True, eq=False)
class OpenGeodesic:
    """A lifted trajectory that does not close up in the double."""

    trajectory: BilliardTrajectory
    start_sheet: int
    report: ValidationReport

    @property
    def end_sheet(self) -> int:
        return self.start_sheet ^ (self.trajectory.n_collisions % 2)

    @property
    def is_loop_in_double(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class GeodesicLoop:
    """A billiard loop with an even number of collisions, lifted to the double."""

    trajectory: BilliardTrajectory
    start_sheet: int
    report: ValidationReport

    def __post_init__(self):
        if not self.report.is_loop:
            raise DomainError("trajectory does not close up")
        if self.trajectory.n_collisions % 2:
            raise DomainError("odd collision count: the lift switches sheets")

    @property
    def end_sheet(self) -> int:
        return self.start_sheet ^ (self.trajectory.n_collisions % 2)

    @property
    def is_loop_in_double(self) -> bool:
        return self.end_sheet == self.start_sheet

    @property
    def closed_geodesic(self) -> bool:
        return bool(self.report.is_periodic)

    @property
    def basepoint(self) -> np.ndarray:
        return self.trajectory.points[0]

    @property
    def length(self) -> float:
        return self.trajectory.length

    @property
    def t0(self) -> np.ndarray:
        """Unit tangent leaving the basepoint."""
        return self.trajectory.directions[0]

    @property
    def t1(self) -> np.ndarray:
        """Unit tangent arriving back at the basepoint."""
        return self.trajectory.directions[-1]

    @property
    def n_collisions(self) -> int:
        return self.trajectory.n_collisions

    @property
    def dim(self) -> int:
        return self.trajectory.dim

    def reversed(self) -> "GeodesicLoop":
        T = self.trajectory.reversed()
        return GeodesicLoop(T, self.start_sheet, self.report)

    def to_json(self):
        out = self.trajectory.to_json(proper=self.report.proper)
        out["start_sheet"] = self.start_sheet
        return out


def lift(P: Polytope, T: BilliardTrajectory, start_sheet: int = 0, tol=FACE_TOL):
    """Lift a trajectory to the double starting on ``start_sheet``.

    Returns a :class:`GeodesicLoop` when the trajectory is a billiard loop
    with even collision count, and an :class:`OpenGeodesic` otherwise (in
    particular for odd periodic orbits, whose lift ends on the other sheet).
    """
    if start_sheet not in (0, 1):
        raise DomainError("start_sheet must be 0 or 1")
    report = validate(P, T, tol)
    if report.is_loop and T.n_collisions % 2 == 0:
        return GeodesicLoop(T, start_sheet, report)
    return OpenGeodesic(T, start_sheet, report)


def parallel_transport(P: Polytope, T: BilliardTrajectory) -> np.ndarray:
    """Transport matrix dR_{F_k} ... dR_{F_1} along the lifted trajectory."""
    M = np.eye(P.dim)
    for f in T.faces:
        M = P.reflection_matrix(f) @ M
    return M


def transport_oracle(P: Polytope, T: BilliardTrajectory, v) -> np.ndarray:
    """Transport ``v`` by unfolding, independently of the reflection product.

    The straight ray through successive reflected copies of the polytope is
    traced from the start point for the trajectory's length.  Crossing a
    wall of the current copy composes the unfolding map with the reflection
    across that wall, expressed in unfolded coordinates.  The vector is
    carried unchanged along the straight line and finally folded back with
    the linear part of the accumulated map.  Only the start point, the first
    direction and the total length of ``T`` are used.
    """
    v = np.asarray(v, dtype=float)
    n = P.dim
    x = T.points[0].copy()
    u = T.directions[0]
    remaining = T.length
    # unfolded copy = {y : A y + b in P}; A orthogonal
    A = np.eye(n)
    b = np.zeros(n)
    for _ in range(T.n_collisions):
        normals = P.normals @ A           # rows: A^T n_j
        offsets = P.offsets - P.normals @ b
        rate = normals @ u
        slack = offsets - normals @ x
        t = np.where(rate > 1e-14, slack / np.where(rate > 1e-14, rate, 1.0), np.inf)
        j = int(np.argmin(t))
        step = t[j]
        if step >= remaining:
            break
        x = x + step * u
        remaining -= step
        w = normals[j]
        c = offsets[j]
        # reflection across the wall {y : w.y = c} in unfolded coordinates
        refl = np.eye(n) - 2.0 * np.outer(w, w)
        b = A @ (2.0 * c * w) + b
        A = A @ refl
    return A @ v
