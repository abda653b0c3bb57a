"""Billiard trajectories inside convex polytopes.

Index convention: ``directions[i]`` is the direction of the segment from
``points[i]`` to ``points[i+1]``, and the direction after collision ``i``
(1-based) is the reflection of the direction before it across face
``faces[i-1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, Escape, NotABilliard, SingularHit
from .polytope import FACE_TOL, Polytope, Where


@dataclass(frozen=True, eq=False)
class BilliardTrajectory:
    """Polygonal path x_0 .. x_{k+1} with collisions on faces F_1 .. F_k."""

    points: np.ndarray
    faces: tuple
    speed: float = 1.0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise DomainError("a trajectory needs at least two points")
        if len(self.faces) != pts.shape[0] - 2:
            raise DomainError("need exactly one face per interior point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "faces", tuple(int(f) for f in self.faces))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_collisions(self) -> int:
        return len(self.faces)

    @property
    def collisions(self) -> np.ndarray:
        return self.points[1:-1]

    @property
    def segments(self) -> np.ndarray:
        return np.diff(self.points, axis=0)

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.segments, axis=1)

    @property
    def directions(self) -> np.ndarray:
        seg = self.segments
        lengths = np.linalg.norm(seg, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return seg / lengths[:, None]

    @property
    def length(self) -> float:
        return float(np.sum(self.segment_lengths))

    def arclength_breaks(self) -> np.ndarray:
        """Normalized times in [0, 1] at which the collisions happen."""
        cum = np.concatenate([[0.0], np.cumsum(self.segment_lengths)])
        return cum / cum[-1]

    def reversed(self) -> "BilliardTrajectory":
        return BilliardTrajectory(self.points[::-1], self.faces[::-1], self.speed)

    def to_json(self, proper=None):
        return {"points": self.points.tolist(), "faces": list(self.faces),
                "proper": proper}

    @classmethod
    def from_json(cls, data):
        return cls(np.asarray(data["points"], dtype=float), tuple(data["faces"]))


@dataclass
class ValidationReport:
    n_collisions: int
    max_reflection_residual: float
    max_face_residual: float
    min_face_slack: float
    min_segment_length: float
    faces_on_boundary: bool
    consecutive_faces_distinct: bool
    proper: bool
    is_loop: bool
    is_periodic: bool
    tol: float
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def to_json(self):
        out = {k: v for k, v in self.__dict__.items()}
        out["ok"] = self.ok
        return out


def validate(P: Polytope, T: BilliardTrajectory, tol=FACE_TOL) -> ValidationReport:
    """Check every billiard axiom and collect residuals instead of raising."""
    pts = T.points
    k = T.n_collisions
    problems = []
    lengths = T.segment_lengths
    min_len = float(lengths.min())
    if min_len <= tol:
        problems.append("zero-length segment")
    dirs = T.directions
    refl = 0.0
    face_res = 0.0
    min_slack = np.inf
    on_faces = True
    for i, f in enumerate(T.faces):
        if not 0 <= f < P.n_faces:
            problems.append(f"face index {f} out of range")
            on_faces = False
            continue
        x = pts[i + 1]
        s = P.slacks(x)
        face_res = max(face_res, abs(s[f]))
        others = np.delete(s, f)
        if others.size:
            min_slack = min(min_slack, float(others.min()))
        if P.contains(x, tol) != (Where.FACE, f):
            on_faces = False
        if min_len > tol:
            r = np.linalg.norm(dirs[i + 1] - P.reflect_dir(f, dirs[i]))
            refl = max(refl, float(r))
    if not on_faces:
        problems.append("a collision is not in the interior of its face")
    distinct = all(a != b for a, b in zip(T.faces, T.faces[1:]))
    if not distinct:
        problems.append("consecutive collisions on the same face")
    if refl >= tol or not np.isfinite(refl):
        problems.append(f"reflection law violated (residual {refl:.3e})")
    proper = P.is_interior(pts[0], tol) and P.is_interior(pts[-1], tol)
    is_loop = bool(np.linalg.norm(pts[0] - pts[-1]) <= tol)
    is_periodic = bool(is_loop and min_len > tol
                       and np.linalg.norm(dirs[0] - dirs[-1]) <= tol)
    return ValidationReport(
        n_collisions=k, max_reflection_residual=float(refl),
        max_face_residual=float(face_res),
        min_face_slack=float(min_slack) if k else float("inf"),
        min_segment_length=min_len, faces_on_boundary=on_faces,
        consecutive_faces_distinct=distinct, proper=bool(proper),
        is_loop=is_loop, is_periodic=is_periodic, tol=tol, problems=problems)


def _next_hit(P: Polytope, x, u, tol):
    """Smallest positive travel time to a face, with tie detection."""
    rate = P.normals @ u
    slack = P.slacks(x)
    ahead = rate > 1e-14
    if not np.any(ahead):
        raise Escape("ray has no forward intersection with the polytope boundary")
    t = np.full(P.n_faces, np.inf)
    t[ahead] = slack[ahead] / rate[ahead]
    t = np.maximum(t, 0.0)
    order = np.argsort(t, kind="stable")
    j = int(order[0])
    return j, float(t[j]), t


def shoot(P: Polytope, start, direction, max_collisions: int, *,
          post_roll=None, stop_time=None, tol=FACE_TOL) -> BilliardTrajectory:
    """Follow a billiard ray from an interior point.

    Parameters
    ----------
    P : Polytope
    start : array_like
        Interior starting point.
    direction : array_like
        Initial direction; normalized internally.
    max_collisions : int
        Stop after this many collisions.
    post_roll : float, optional
        Distance travelled after the last collision.  Defaults to half the
        previous segment; always clamped to half the distance to the next
        face so the endpoint stays strictly inside.
    stop_time : float, optional
        Total path length at which to stop, if reached before
        ``max_collisions`` collisions.

    Raises
    ------
    SingularHit
        When a collision lands within ``tol`` of the codimension-2 skeleton.
    Escape
        When the ray leaves an unbounded polytope.
    """
    x = np.asarray(start, dtype=float)
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    if not P.is_interior(x, tol):
        raise DomainError("start point must be interior")
    points = [x]
    faces = []
    travelled = 0.0
    prev_len = None
    while True:
        j, t, _ = _next_hit(P, x, u, tol)
        if stop_time is not None and travelled + t >= stop_time:
            points.append(x + (stop_time - travelled) * u)
            break
        if len(faces) == max_collisions:
            if post_roll is not None:
                roll = float(post_roll)
            elif prev_len is not None:
                roll = 0.5 * prev_len
            else:
                roll = 0.5 * t
            points.append(x + min(roll, 0.5 * t) * u)
            break
        hit = x + t * u
        m = P.contains(hit, tol)
        if m.kind is not Where.FACE:
            raise SingularHit(f"collision {len(faces) + 1} hits the skeleton at {hit}")
        j = m.face
        points.append(hit)
        faces.append(j)
        travelled += t
        prev_len = t
        x = hit
        u = P.reflect_dir(j, u)
        u = u / np.linalg.norm(u)
    return BilliardTrajectory(np.array(points), tuple(faces))


def loop_from_points(P: Polytope, base, collisions, faces=None, tol=FACE_TOL) -> BilliardTrajectory:
    """Assemble ``base -> collisions... -> base`` and insist it is a billiard.

    Faces are inferred from membership when not given.  Raises NotABilliard
    (carrying the validation report) if any axiom fails.
    """
    cols = np.atleast_2d(np.asarray(collisions, dtype=float))
    if cols.shape[0] < 1:
        raise DomainError("need at least one collision")
    base = np.asarray(base, dtype=float)
    if faces is None:
        faces = []
        for c in cols:
            m = P.contains(c, tol)
            if m.kind is not Where.FACE:
                raise NotABilliard(f"collision {c} is not in the interior of a face")
            faces.append(m.face)
    if len(faces) != cols.shape[0]:
        raise DomainError("collisions and faces differ in length")
    T = BilliardTrajectory(np.vstack([base, cols, base]), tuple(faces))
    report = validate(P, T, tol)
    if not report.ok:
        raise NotABilliard("; ".join(report.problems), report)
    return T


def unfolded_start(P: Polytope, T: BilliardTrajectory) -> np.ndarray:
    """Start point reflected across the collision hyperplanes in order.

    For a genuine billiard path the result, the collision points' images
    and the endpoint are collinear, so its distance to the endpoint equals
    the path length.
    """
    y = T.points[0]
    for f in T.faces:
        y = P.reflect_point(f, y)
    return y
