"""Explicit polytopes carrying stable geodesic bouquets.

* A D3-symmetric hexagon with three 2-collision loops from its center.
* The rotated dual-simplex polytope in R^n with n loops, one per pair of
  half-spaces obtained by tilting a face of the dual simplex both ways.
* The hyperplane family in general position built from a simplex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .billiards import loop_from_points
from .double import lift
from .errors import ConstructionFailed, DegenerateGeometry, DomainError, NotABilliard
from .polytope import Polytope
from .stability import Bouquet, max_tangent_cosine, PARALLEL_COS
from .subspaces import Subspace, intersect_report

SLACK_MIN = 1e-6
EPS_START = 0.1
EPS_FLOOR = 1e-6


def hyperplanes_from_simplex(x, v) -> list[Subspace]:
    """Hyperplanes Pi_1..Pi_n in general position from n simplex vectors.

    ``Pi_n = span{x_1..x_n}`` and, for i < n,
    ``Pi_i = span{x_i, ..., x_{i+n-3}, v}`` with indices taken cyclically.
    Requires the x_i to span an (n-1)-space with every n-1 of them
    independent, and v outside that span.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    n = x.shape[0]
    if x.shape != (n, n) or v.shape != (n,) or n < 3:
        raise DomainError("need n >= 3 vectors in R^n")
    if np.any(np.linalg.norm(x, axis=1) == 0):
        raise DomainError("simplex vectors must be nonzero")
    if np.linalg.matrix_rank(x, tol=1e-9) != n - 1:
        raise DomainError("simplex vectors must span an (n-1)-dimensional subspace")
    for i in range(n):
        if np.linalg.matrix_rank(np.delete(x, i, axis=0), tol=1e-9) != n - 1:
            raise DomainError("some n-1 of the simplex vectors are dependent")
    base = Subspace.span(x)
    if base.contains(v, tol=1e-9):
        raise DomainError("v lies in the span of the simplex vectors")
    planes = []
    for i in range(n - 1):
        idx = [(i + k) % n for k in range(n - 2)]
        vecs = np.vstack([x[idx], v])
        pi = Subspace.span(vecs)
        if pi.dim != n - 1:
            raise DomainError(f"Pi_{i + 1} is not a hyperplane")
        planes.append(pi)
    planes.append(base)
    for i in range(n):
        if planes[i].residual(x[i]) > 1e-12 * max(1.0, np.linalg.norm(x[i])):
            raise DomainError(f"x_{i + 1} does not lie in Pi_{i + 1}")
    inter, margin = intersect_report(planes)
    if inter.dim != 0:
        raise DomainError("hyperplanes do not meet trivially")
    return planes


def regular_simplex(n: int) -> np.ndarray:
    """Unit vertices of a regular simplex in R^{n-1} summing to zero.

    The standard basis of R^n is centered and written in the orthonormal
    Helmert basis of the hyperplane ``sum(coords) = 0``, then rescaled.
    """
    if n < 2:
        raise DomainError("need at least two vertices")
    helmert = np.zeros((n - 1, n))
    for k in range(1, n):
        helmert[k - 1, :k] = 1.0
        helmert[k - 1, k] = -k
        helmert[k - 1] /= math.sqrt(k * (k + 1))
    centered = np.eye(n) - 1.0 / n
    pts = centered @ helmert.T
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def regular_simplex_central_angles(n: int) -> float:
    """Largest angle at a vertex between another vertex and the center."""
    if n < 3:
        raise DomainError("need n >= 3")
    xs = regular_simplex(n)
    worst = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a = xs[i] - xs[j]
            b = -xs[j]
            c = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
            worst = max(worst, math.acos(max(-1.0, min(1.0, c))))
    return worst


# -- hexagon ------------------------------------------------------------------

@dataclass(frozen=True)
class HexagonFamilyParams:
    theta: float
    scale: float = 1.0

    def __post_init__(self):
        if not (math.pi / 3 < self.theta < math.pi / 2):
            raise DomainError("theta must lie strictly between pi/3 and pi/2")
        if not self.scale > 0:
            raise DomainError("scale must be positive")


def _rot2(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def hexagon_vertices(params: HexagonFamilyParams) -> np.ndarray:
    """Counter-clockwise vertices, starting at the theta-vertex on the x axis."""
    th, d = params.theta, params.scale
    t = math.sqrt(3) * d / (2 * math.sin(th / 2 + math.pi / 3))
    bend = np.array([d, 0.0]) + t * np.array([-math.cos(th / 2), math.sin(th / 2)])
    out = []
    for k in range(3):
        R = _rot2(2 * math.pi * k / 3)
        out.append(R @ np.array([d, 0.0]))
        out.append(R @ bend)
    return np.array(out)


def build_hexagon(params: HexagonFamilyParams, slack_min=SLACK_MIN):
    """Hexagon polytope and its three-loop bouquet from the center.

    Each loop leaves the center towards the upper edge at a theta-vertex,
    bounces straight across the axis to the mirror point on the lower edge
    and returns, so its two collisions are mirror images about the axis.
    """
    th, d = params.theta, params.scale
    verts = hexagon_vertices(params)
    normals, offsets = [], []
    for i in range(6):
        a, b = verts[i], verts[(i + 1) % 6]
        e = b - a
        nrm = np.array([e[1], -e[0]]) / np.linalg.norm(e)
        normals.append(nrm)
        offsets.append(nrm @ a)
    P = Polytope(normals, offsets)
    S = d * np.array([1 - math.cos(th), math.cos(th) * math.tan(th / 2)])
    Q = S * np.array([1.0, -1.0])
    origin = np.zeros(2)
    loops = []
    for k in range(3):
        R = _rot2(2 * math.pi * k / 3)
        cols = np.array([R @ S, R @ Q])
        for c in cols:
            s = P.slacks(c)
            on = np.argsort(np.abs(s))
            if abs(s[on[0]]) > 1e-9 or s[on[1]] <= slack_min:
                raise DegenerateGeometry(
                    f"collision {c} is not inside an open edge (slack {s[on[1]]:.3e})")
        T = loop_from_points(P, origin, cols)
        loops.append(lift(P, T, 0))
    return P, Bouquet(P, origin, loops)


# -- rotated dual simplex -----------------------------------------------------

@dataclass(frozen=True)
class SimplexFamilyParams:
    n: int
    epsilon: float | None = None
    flip: bool = False  # use -m_i instead of m_i; the output must not change

    def __post_init__(self):
        if self.n < 3:
            raise DomainError("n must be at least 3")
        if self.epsilon is not None and not (0 < self.epsilon < math.pi / 2):
            raise DomainError("epsilon must be positive and below pi/2")

    @property
    def phi(self) -> float:
        return math.pi / 4 + self.epsilon / 2


@dataclass
class SimplexFamily:
    polytope: Polytope
    bouquet: Bouquet
    planes: list
    epsilon: float
    phi: float
    simplex: np.ndarray
    tilt_normals: np.ndarray
    checks: dict


def _simplex_geometry(n, eps, flip):
    phi = math.pi / 4 + eps / 2
    xs = np.hstack([regular_simplex(n), np.zeros((n, 1))])
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    planes = hyperplanes_from_simplex(xs, e_n)
    m_hat = np.array([pl.complement().basis[0] for pl in planes])
    if flip:
        m_hat = -m_hat
    normals, offsets = [], []
    for i in range(n):
        for sgn in (-1.0, 1.0):
            normals.append(math.cos(phi) * xs[i] + sgn * math.sin(phi) * m_hat[i])
            offsets.append(math.cos(phi))
    P = Polytope(normals, offsets)
    r = math.cos(phi) / math.cos(phi - eps)
    cols = []
    for i in range(n):
        lo = r * (math.cos(eps) * xs[i] - math.sin(eps) * m_hat[i])
        hi = r * (math.cos(eps) * xs[i] + math.sin(eps) * m_hat[i])
        cols.append((lo, hi, (2 * i, 2 * i + 1)))
    return P, xs, planes, m_hat, cols, phi


def _simplex_candidate(n, eps, flip):
    """Build one candidate and run the acceptance checks; never raises on a failed check."""
    checks = {}
    P, xs, planes, m_hat, cols, phi = _simplex_geometry(n, eps, flip)
    checks["compact"] = P.is_compact()
    slack = np.inf
    for lo, hi, (f_lo, f_hi) in cols:
        for pt, f in ((lo, f_lo), (hi, f_hi)):
            s = np.delete(P.slacks(pt), f)
            slack = min(slack, float(s.min()))
    checks["min_collision_slack"] = slack
    checks["collisions_inside"] = slack > SLACK_MIN
    origin = np.zeros(n)
    loops = []
    checks["loops_valid"] = True
    for lo, hi, faces in cols:
        try:
            T = loop_from_points(P, origin, [lo, hi], list(faces))
        except NotABilliard:
            checks["loops_valid"] = False
            break
        loops.append(lift(P, T, 0))
    B = None
    if checks["loops_valid"]:
        B = Bouquet(P, origin, loops)
        cos = max_tangent_cosine(B)
        checks["max_tangent_cos"] = cos
        checks["tangents_distinct"] = cos < PARALLEL_COS
    else:
        checks["tangents_distinct"] = False
    return P, B, planes, m_hat, phi, xs, checks


_REQUIRED = ("compact", "collisions_inside", "loops_valid", "tangents_distinct")


def build_simplex_family(params: SimplexFamilyParams) -> SimplexFamily:
    """Rotated dual-simplex polytope X_phi with its n-loop bouquet.

    With ``params.epsilon`` unset, epsilon starts at 0.1 and is halved until
    every check passes (floor 1e-6).  A fixed epsilon that fails a check
    raises ConstructionFailed as well.
    """
    n = params.n
    schedule = [params.epsilon] if params.epsilon is not None else _eps_schedule()
    last = None
    for eps in schedule:
        P, B, planes, m_hat, phi, xs, checks = _simplex_candidate(n, eps, params.flip)
        failing = [k for k in _REQUIRED if not checks[k]]
        if not failing:
            return SimplexFamily(P, B, planes, eps, phi, xs[:, :], m_hat, checks)
        last = (eps, failing[0], checks)
    eps, what, checks = last
    raise ConstructionFailed(f"n={n}: check '{what}' failed (last epsilon {eps:.3e}); {checks}")


def _eps_schedule():
    eps = EPS_START
    while eps >= EPS_FLOOR:
        yield eps
        eps /= 2
