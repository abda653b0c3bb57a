"""Stationarity and stability certificates for geodesic bouquets in flat doubles.

For a loop with transport P and end tangents t0 (leaving) and t1 (arriving),
the defect operator is ``D = P (I - t0 t0^T) - (I - t1 t1^T)``.  A basepoint
vector extends to a null variation along the loop exactly when it lies in
ker D, so a bouquet is stable iff the kernels of its loops meet trivially.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .billiards import BilliardTrajectory, loop_from_points, validate
from .double import GeodesicLoop, lift, parallel_transport
from .errors import DomainError, NotInvariant, RankAmbiguous
from .polytope import FACE_TOL, Polytope
from .subspaces import Subspace, intersect_report, nullspace, nullspace_report

STATIONARY_TOL = 1e-9
INVARIANCE_TOL = 1e-9
PARALLEL_COS = 1.0 - 1e-6
MARGIN_TOL = 1e-8
AGREE_ANGLE = 1e-9


@dataclass(frozen=True, eq=False)
class DefectOperator:
    matrix: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    transport: np.ndarray

    def __matmul__(self, v):
        return self.matrix @ v


def defect_matrix(P_mat, t0, t1) -> np.ndarray:
    n = len(t0)
    return P_mat @ (np.eye(n) - np.outer(t0, t0)) - (np.eye(n) - np.outer(t1, t1))


def defect_operator(P: Polytope, loop: GeodesicLoop) -> DefectOperator:
    M = parallel_transport(P, loop.trajectory)
    return DefectOperator(defect_matrix(M, loop.t0, loop.t1), loop.t0, loop.t1, M)


def kernel_two_collision(loop: GeodesicLoop) -> Subspace:
    """Hyperplane orthogonal to t0 + t1 (kernel of a 2-collision loop's D)."""
    if loop.n_collisions != 2:
        raise DomainError("the hyperplane formula needs exactly 2 collisions")
    s = loop.t0 + loop.t1
    if np.linalg.norm(s) <= 1e-9:
        raise DomainError("end tangents are anti-parallel")
    return Subspace.orthogonal_to(s)


def invariant_plane_kernel(P_mat, t0, t1, tol=INVARIANCE_TOL) -> Subspace:
    """Kernel of D from the invariant-plane formula.

    With W = span{t0, t1} invariant under P, the kernel is the fixed space of
    P on W^perp plus the line through ``t0 - det(P|W) t1``.
    """
    n = len(t0)
    W = Subspace.span([t0, t1])
    if W.dim != 2:
        raise DomainError("t0 and t1 must be linearly independent")
    proj = W.projector()
    resid = np.linalg.norm((np.eye(n) - proj) @ P_mat @ proj, 2)
    if resid >= tol:
        raise NotInvariant(f"span(t0, t1) is not invariant (residual {resid:.3e})")
    Q = W.matrix
    det_w = float(np.linalg.det(Q.T @ P_mat @ Q))
    sign = 1.0 if det_w > 0 else -1.0
    C = W.complement()
    line = Subspace.span([t0 - sign * t1])
    if C.dim == 0:
        return line
    R = C.matrix
    fixed = nullspace(R.T @ P_mat @ R - np.eye(C.dim))
    E1 = Subspace.span((R @ fixed.matrix).T, n) if fixed.dim else Subspace.zero(n)
    return E1.direct_sum(line)


def kernel_invariant_plane(P: Polytope, loop: GeodesicLoop, tol=INVARIANCE_TOL) -> Subspace:
    M = parallel_transport(P, loop.trajectory)
    return invariant_plane_kernel(M, loop.t0, loop.t1, tol)


@dataclass(frozen=True, eq=False)
class Bouquet:
    """Loops sharing a basepoint, all starting on the same sheet."""

    polytope: Polytope
    basepoint: np.ndarray
    loops: tuple

    def __post_init__(self):
        p = np.asarray(self.basepoint, dtype=float)
        object.__setattr__(self, "basepoint", p)
        object.__setattr__(self, "loops", tuple(self.loops))
        if not self.loops:
            raise DomainError("a bouquet needs at least one loop")
        sheets = {lp.start_sheet for lp in self.loops}
        if len(sheets) != 1:
            raise DomainError("loops start on different sheets")
        for lp in self.loops:
            T = lp.trajectory
            if (np.linalg.norm(T.points[0] - p) > 1e-10
                    or np.linalg.norm(T.points[-1] - p) > 1e-10):
                raise DomainError("a loop does not start and end at the basepoint")
            if T.n_collisions % 2:
                raise DomainError("a loop has an odd number of collisions")

    @classmethod
    def from_points(cls, P: Polytope, basepoint, collision_lists, faces=None,
                    start_sheet=0, tol=FACE_TOL):
        loops = []
        for i, cols in enumerate(collision_lists):
            f = None if faces is None else faces[i]
            T = loop_from_points(P, basepoint, cols, f, tol)
            loops.append(lift(P, T, start_sheet, tol))
        return cls(P, basepoint, loops)

    @property
    def dim(self) -> int:
        return self.polytope.dim

    @property
    def length(self) -> float:
        return float(sum(lp.length for lp in self.loops))

    def outgoing_tangents(self) -> np.ndarray:
        """The 2k unit tangents leaving the basepoint: t0_i and -t1_i."""
        out = []
        for lp in self.loops:
            out.append(lp.t0)
            out.append(-lp.t1)
        return np.array(out)

    def without(self, index: int) -> "Bouquet":
        loops = [lp for i, lp in enumerate(self.loops) if i != index]
        return Bouquet(self.polytope, self.basepoint, loops)

    def to_json(self):
        return {"basepoint": self.basepoint.tolist(),
                "loops": [lp.to_json() for lp in self.loops]}

    @classmethod
    def from_json(cls, P: Polytope, data, tol=FACE_TOL):
        """Rebuild from :meth:`to_json` output, validating but not rejecting loops.

        Each loop is re-validated; a loop that fails an axiom is kept with its
        report so that :func:`certify` can return an Indeterminate verdict.
        """
        loops = []
        for d in data["loops"]:
            T = BilliardTrajectory.from_json(d)
            rep = validate(P, T, tol)
            loops.append(GeodesicLoop(T, int(d.get("start_sheet", 0)), rep))
        return cls(P, np.asarray(data["basepoint"], dtype=float), loops)


def stationarity_residual(B: Bouquet) -> float:
    return float(np.linalg.norm(B.outgoing_tangents().sum(axis=0)))


def is_stationary(B: Bouquet, tol=STATIONARY_TOL):
    """Return ``(stationary, residual)`` for the outgoing-tangent sum."""
    r = stationarity_residual(B)
    return r < tol, r


def max_tangent_cosine(B: Bouquet) -> float:
    t = B.outgoing_tangents()
    g = np.abs(t @ t.T)
    np.fill_diagonal(g, -np.inf)
    return float(g.max()) if len(t) > 1 else 0.0


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INDETERMINATE = "Indeterminate"


@dataclass
class LoopKernel:
    kernel: Subspace | None
    method: str
    rank_D: int | None
    hyperplane_angle: float | None = None
    invariant_plane_angle: float | None = None
    reflection_residual: float = 0.0
    error: str | None = None


@dataclass
class StabilityCertificate:
    stationarity_residual: float
    stationary: bool
    per_loop: list
    intersection: Subspace | None
    triviality_margin: float
    verdict: Verdict
    max_tangent_cos: float
    tangents_parallel: bool
    max_reflection_residual: float
    tolerances: dict = field(default_factory=dict)

    @property
    def per_loop_kernels(self):
        return [lk.kernel for lk in self.per_loop]

    @property
    def intersection_dim(self):
        return None if self.intersection is None else self.intersection.dim

    def to_json(self):
        def sub(s):
            return None if s is None else s.to_json()
        return {
            "verdict": self.verdict.value,
            "intersection_dim": self.intersection_dim,
            "triviality_margin": self.triviality_margin,
            "stationarity_residual": self.stationarity_residual,
            "stationary": self.stationary,
            "max_tangent_cos": self.max_tangent_cos,
            "tangents_parallel": self.tangents_parallel,
            "max_reflection_residual": self.max_reflection_residual,
            "intersection": sub(self.intersection),
            "loops": [{"kernel": sub(lk.kernel), "method": lk.method,
                       "rank_D": lk.rank_D,
                       "hyperplane_angle": lk.hyperplane_angle,
                       "invariant_plane_angle": lk.invariant_plane_angle,
                       "reflection_residual": lk.reflection_residual,
                       "error": lk.error} for lk in self.per_loop],
            "tolerances": self.tolerances,
        }


def _loop_kernel(P: Polytope, loop: GeodesicLoop) -> LoopKernel:
    D = defect_operator(P, loop)
    refl = loop.report.max_reflection_residual
    try:
        res = nullspace_report(D.matrix)
    except RankAmbiguous as exc:
        return LoopKernel(None, "nullspace", None, reflection_residual=refl, error=str(exc))
    numeric = res.subspace
    rank = P.dim - numeric.dim
    lk = LoopKernel(numeric, "nullspace", rank, reflection_residual=refl)
    # the hyperplane formula needs rank D = 1, which fails for closed geodesics (t0 = t1)
    if (loop.n_collisions == 2 and np.linalg.norm(loop.t0 + loop.t1) > 1e-9
            and np.linalg.norm(loop.t0 - loop.t1) > 1e-9):
        fast = kernel_two_collision(loop)
        lk.hyperplane_angle = fast.max_angle(numeric)
        lk.kernel = fast
        lk.method = "two-collision hyperplane"
        if lk.hyperplane_angle >= AGREE_ANGLE:
            lk.error = f"hyperplane and nullspace disagree ({lk.hyperplane_angle:.3e} rad)"
    try:
        inv = invariant_plane_kernel(D.transport, loop.t0, loop.t1)
        lk.invariant_plane_angle = inv.max_angle(numeric)
    except (NotInvariant, DomainError, RankAmbiguous):
        pass
    return lk


def certify(B: Bouquet, margin_tol=MARGIN_TOL, stationary_tol=STATIONARY_TOL) -> StabilityCertificate:
    """Kernel-intersection stability verdict for a bouquet in a flat double.

    Each loop's kernel comes from the 2-collision hyperplane formula when it
    applies (cross-checked against the numerical nullspace of D) and from
    the nullspace otherwise.  Any rank ambiguity or failed cross-check makes
    the verdict Indeterminate.
    """
    P = B.polytope
    ok, resid = is_stationary(B, stationary_tol)
    per_loop = [_loop_kernel(P, lp) for lp in B.loops]
    cos = max_tangent_cosine(B)
    refl = max(lk.reflection_residual for lk in per_loop)
    tolerances = {"stationarity": stationary_tol, "margin": margin_tol,
                  "nullspace_rel_tol": 1e-8, "agreement_angle": AGREE_ANGLE,
                  "parallel_cos": PARALLEL_COS, "face": FACE_TOL}
    intersection = None
    margin = 0.0
    if any(lk.kernel is None or lk.error for lk in per_loop):
        verdict = Verdict.INDETERMINATE
    else:
        try:
            intersection, margin = intersect_report([lk.kernel for lk in per_loop])
        except RankAmbiguous:
            verdict = Verdict.INDETERMINATE
        else:
            if intersection.dim == 0 and margin > margin_tol:
                verdict = Verdict.STABLE
            elif intersection.dim == 0:
                verdict = Verdict.INDETERMINATE
            else:
                verdict = Verdict.UNSTABLE
    if not all(lp.report.ok for lp in B.loops):
        verdict = Verdict.INDETERMINATE
    return StabilityCertificate(
        stationarity_residual=resid, stationary=ok, per_loop=per_loop,
        intersection=intersection, triviality_margin=float(margin),
        verdict=verdict, max_tangent_cos=cos, tangents_parallel=cos > PARALLEL_COS,
        max_reflection_residual=float(refl), tolerances=tolerances)


# -- index form ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteField:
    """Piecewise-linear vector field along one loop.

    ``coords[j]`` are the coordinates of V(s_j) in the frame obtained by
    parallel transport from the basepoint; in the base chart the field is
    ``L(s) @ coords`` where L(s) is the product of the reflections met
    before time s.  The loop-closing condition reads
    ``coords[-1] = P^T coords[0]``.
    """

    s: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        c = np.asarray(self.coords, dtype=float)
        if s.ndim != 1 or c.shape[0] != s.size or s.size < 2:
            raise DomainError("samples and coordinates do not match")
        if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise DomainError("samples must increase from 0 to 1")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "coords", c)

    def chart_values(self, P: Polytope, loop: GeodesicLoop) -> np.ndarray:
        """Values in the base chart (right-continuous at collision times)."""
        frames = _segment_frames(P, loop)
        breaks = loop.trajectory.arclength_breaks()[1:-1]
        seg = np.searchsorted(breaks, self.s, side="right")
        seg[-1] = len(frames) - 1
        return np.einsum("jab,jb->ja", frames[seg], self.coords)

    @classmethod
    def from_chart_values(cls, P: Polytope, loop: GeodesicLoop, s, values):
        s = np.asarray(s, dtype=float)
        frames = _segment_frames(P, loop)
        breaks = loop.trajectory.arclength_breaks()[1:-1]
        seg = np.searchsorted(breaks, s, side="right")
        seg[-1] = len(frames) - 1
        coords = np.einsum("jba,jb->ja", frames[seg], np.asarray(values, dtype=float))
        return cls(s, coords)


def _segment_frames(P: Polytope, loop: GeodesicLoop) -> np.ndarray:
    frames = [np.eye(P.dim)]
    for f in loop.trajectory.faces:
        frames.append(P.reflection_matrix(f) @ frames[-1])
    return np.array(frames)


def index_form(loop: GeodesicLoop, V: DiscreteField) -> float:
    """Q(V) = integral of |d/ds V^perp|^2 for a piecewise-linear frame field.

    In the transported frame the unit tangent is constant (= t0), so the
    normal part of V has coordinates ``(I - t0 t0^T) coords`` and the
    integral over each linear piece is exact.
    """
    t0 = loop.t0
    c = V.coords
    perp = c - np.outer(c @ t0, t0)
    d = np.diff(perp, axis=0)
    h = np.diff(V.s)
    return float(np.sum(np.sum(d * d, axis=1) / h))


def random_closing_field(P: Polytope, loop: GeodesicLoop, rng, n_samples=8, v=None):
    """Random piecewise-linear field with V(0) = V(1) = v."""
    n = P.dim
    M = parallel_transport(P, loop.trajectory)
    if v is None:
        v = rng.standard_normal(n)
    inner = np.sort(rng.uniform(0.0, 1.0, n_samples - 2))
    s = np.concatenate([[0.0], inner, [1.0]])
    s = np.unique(s)
    coords = rng.standard_normal((s.size, n))
    coords[0] = v
    coords[-1] = M.T @ v
    return DiscreteField(s, coords), np.asarray(v, dtype=float)


def null_extension(P: Polytope, loop: GeodesicLoop, v, n_samples=16) -> DiscreteField:
    """Field with V(0) = V(1) = v and zero index form, for v in ker D.

    The normal component of v is carried parallel along the loop and the
    tangential component is interpolated linearly between <t0, v> and
    <t1, v>.  Raises DomainError unless |D v| < 1e-9 |v|.
    """
    v = np.asarray(v, dtype=float)
    D = defect_operator(P, loop)
    if np.linalg.norm(D.matrix @ v) >= 1e-9 * np.linalg.norm(v):
        raise DomainError("vector is not in the kernel of the defect operator")
    t0, t1 = loop.t0, loop.t1
    w = v - (v @ t0) * t0
    s = np.linspace(0.0, 1.0, n_samples)
    tang = (1.0 - s) * (v @ t0) + s * (v @ t1)
    coords = w[None, :] + tang[:, None] * t0[None, :]
    return DiscreteField(s, coords)
