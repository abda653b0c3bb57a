"""Convexity and curvature certificates for the smoothed squared distance.

* ``projective_inradius``: sup of r / |z - v| over balls B_r(z) inside a
  polyhedral cone with apex v, certified from below.
* ``strong_convexity_certificate``: the lower bound
  ``kappa_hat = kappa * omega_N * theta((1 + r) / rho + |v - c|)`` on the
  strong convexity of the smoothed field over the ball B_r(c).
* ``level_surface_curvature``: sectional curvature of a level set from the
  2x2 minor of the Hessian.
* ``length_neutral_level``: the level whose rim adds no arc length to a
  path crossing a face, used as the default surface level.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.integrate import quad
from scipy.special import gammaln, ndtr

from ..errors import DomainError, SingularPoint
from ..polytope import Polytope

ENUM_CAP = 20000          # max generator subsets tried by the dual enumeration
TANGENT_TOL = 1e-9
GRADIENT_FLOOR = 1e-8
STRONG_CONVEXITY = 2.0    # Hessian of |x - v|^2


@dataclass
class ConeData:
    """Polyhedral cone ``apex + cone(generators)``.

    ``facets`` (inward unit normals) may be given directly; otherwise they
    are enumerated from the generators when needed.
    """

    apex: np.ndarray
    generators: np.ndarray | None = None
    facets: np.ndarray | None = None
    rho: float | None = None
    method: str = ""
    witness: np.ndarray | None = None

    def __post_init__(self):
        self.apex = np.asarray(self.apex, dtype=float)
        if self.generators is None and self.facets is None:
            raise DomainError("a cone needs generators or facet normals")
        if self.generators is not None:
            self.generators = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if self.facets is not None:
            f = np.atleast_2d(np.asarray(self.facets, dtype=float))
            self.facets = f / np.linalg.norm(f, axis=1, keepdims=True)

    @property
    def dim(self) -> int:
        return self.apex.shape[0]

    def to_json(self):
        return {"apex": self.apex.tolist(), "rho": self.rho, "method": self.method,
                "witness": None if self.witness is None else self.witness.tolist()}


def vertex_cone(P: Polytope, vertex) -> ConeData:
    """Nearest-point region of a vertex of X x {0} in R^{n+1}.

    It is ``(v, 0) + cone(n_j for faces j through v, +-e_{n+1})``, i.e. the
    normal cone of X at v times the real line.
    """
    v = np.asarray(vertex, dtype=float)
    n = P.dim
    act = np.flatnonzero(np.abs(P.slacks(v)) <= 1e-9)
    if act.size < n:
        raise DomainError("point is not a vertex of the polytope")
    gens = np.hstack([P.normals[act], np.zeros((act.size, 1))])
    e = np.zeros(n + 1)
    e[-1] = 1.0
    gens = np.vstack([gens, e, -e])
    return ConeData(np.append(v, 0.0), gens)


def cone_facets(generators, cap=ENUM_CAP):
    """Inward unit facet normals of cone(generators) by dual enumeration.

    A facet is spanned by N - 1 independent generators with all the others
    on one side.  Returns None when the number of subsets exceeds ``cap``.
    """
    G = np.atleast_2d(np.asarray(generators, dtype=float))
    k, N = G.shape
    if np.linalg.matrix_rank(G, tol=1e-10) < N:
        raise DomainError("generators do not span the ambient space")
    if math.comb(k, N - 1) > cap:
        return None
    scale = np.max(np.linalg.norm(G, axis=1))
    found = []
    for S in itertools.combinations(range(k), N - 1):
        sub = G[list(S)]
        _, sv, vt = np.linalg.svd(sub)
        if sv[-1] <= 1e-10 * scale:
            continue
        d = vt[-1]
        side = G @ d
        if np.all(side >= -1e-10):
            pass
        elif np.all(side <= 1e-10):
            d = -d
        else:
            continue
        if not any(np.allclose(d, f, atol=1e-9) for f in found):
            found.append(d)
    if not found:
        # the generators span everything as a cone: no boundary at all
        raise DomainError("cone is the whole space")
    return np.array(found)


def _ratio(D, z):
    return float(np.min(D @ z) / np.linalg.norm(z))


def projective_inradius(cone: ConeData, iters=60, seed=0) -> float:
    """Certified lower bound on the projective inradius of ``cone``.

    With inward facet normals d_j, the largest ball about z inside the cone
    has radius ``min_j d_j . z``, so any z gives the bound min_j d_j.z/|z|.
    The direction is improved by repeated linear programs
    ``max t  s.t.  d_j . z >= t,  w . z = 1`` with w the current direction.
    When the facet enumeration is too large, random directions inside the
    cone are sampled and the result is flagged as a sampled lower bound.
    """
    D = cone.facets
    if D is None:
        D = cone_facets(cone.generators)
    if D is None:
        return _sampled_inradius(cone, seed)
    N = D.shape[1]
    w = D.sum(axis=0)
    if np.linalg.norm(w) < 1e-12:
        raise DomainError("cone has empty interior")
    w /= np.linalg.norm(w)
    best, best_z = (_ratio(D, w), w) if np.all(D @ w > 0) else (-np.inf, None)
    c = np.zeros(N + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-D, np.ones((D.shape[0], 1))])
    b_ub = np.zeros(D.shape[0])
    bounds = [(-10.0, 10.0)] * N + [(None, None)]
    for _ in range(iters):
        A_eq = np.append(w, 0.0)[None, :]
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds,
                      method="highs")
        if res.status != 0:
            break
        z = res.x[:N]
        r = _ratio(D, z)
        if r > best + 1e-15:
            best, best_z = r, z / np.linalg.norm(z)
            w = best_z
        else:
            break
    if not best > 0:
        raise DomainError("cone has empty interior")
    cone.rho = min(best, 1.0)
    cone.method = "lp"
    cone.witness = best_z
    return cone.rho


def _sampled_inradius(cone, seed, samples=20000):
    G = cone.generators
    rng = np.random.default_rng(seed)
    lam = rng.exponential(size=(samples, G.shape[0]))
    Z = lam @ G
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    # membership LPs only: no facet list is available here
    best, best_z = 0.0, None
    for z in Z[:64]:
        r = _ball_radius_lp(G, z)
        if r > best:
            best, best_z = r, z
    cone.rho = best
    cone.method = "sampled lower bound"
    cone.witness = best_z
    return best


def _ball_radius_lp(G, z):
    # if the cross-polytope z + r*(+-e_i) is inside, so is its inscribed ball
    N = G.shape[1]
    lo, hi = 0.0, 1.0
    pts = np.vstack([np.eye(N), -np.eye(N)])
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        ok = all(_in_cone(G, z + mid * p) for p in pts)
        lo, hi = (mid, hi) if ok else (lo, mid)
    return lo / math.sqrt(N)


def _in_cone(G, x):
    res = linprog(np.zeros(G.shape[0]), A_eq=G.T, b_eq=x, bounds=[(0, None)] * G.shape[0],
                  method="highs")
    return res.status == 0


def unit_ball_volume(N: int) -> float:
    return math.exp(0.5 * N * math.log(math.pi) - gammaln(0.5 * N + 1))


def gaussian_radial_log(t, sigma, N) -> float:
    """log theta(t) for the isotropic Gaussian density in R^N."""
    return -0.5 * N * math.log(2 * math.pi * sigma * sigma) - 0.5 * (t / sigma) ** 2


@dataclass
class ConvexityCertificate:
    kappa_hat: float
    log10_kappa_hat: float
    rho: float
    radius: float
    center: np.ndarray
    translation: np.ndarray
    vertex: np.ndarray
    argument: float
    ambient_dim: int
    details: dict = field(default_factory=dict)

    def to_json(self):
        return {"kappa_hat": self.kappa_hat, "log10_kappa_hat": self.log10_kappa_hat,
                "rho": self.rho, "radius": self.radius, "center": self.center.tolist(),
                "translation": self.translation.tolist(), "vertex": self.vertex.tolist(),
                "theta_argument": self.argument, "ambient_dim": self.ambient_dim}


def strong_convexity_certificate(field, v, r, center=None, cone: ConeData | None = None,
                                 kappa=STRONG_CONVEXITY) -> ConvexityCertificate:
    """Strong convexity constant of the smoothed field on the ball B_r(center).

    ``v`` is a vertex of X (in R^n) or of X x {0}.  The bound is stated for
    balls about the origin, so everything is translated by ``-center``; the
    translation is recorded.  kappa_hat underflows for small sigma, so its
    base-10 logarithm is reported as well.
    """
    P = field.polytope
    N = P.dim + 1
    v = np.asarray(v, dtype=float)
    v_amb = v if v.shape[0] == N else np.append(v, 0.0)
    c = np.zeros(N) if center is None else np.asarray(center, dtype=float)
    if cone is None:
        cone = vertex_cone(P, v_amb[:P.dim])
    rho = cone.rho if cone.rho is not None else projective_inradius(cone)
    if not rho > 0:
        raise DomainError("projective inradius must be positive")
    if not r > 0:
        raise DomainError("ball radius must be positive")
    vt = v_amb - c
    arg = (1.0 + r) / rho + float(np.linalg.norm(vt))
    log_k = math.log(kappa) + math.log(unit_ball_volume(N)) + gaussian_radial_log(arg, field.sigma, N)
    return ConvexityCertificate(
        kappa_hat=math.exp(log_k), log10_kappa_hat=log_k / math.log(10), rho=rho, radius=float(r),
        center=c, translation=-c, vertex=v_amb, argument=arg, ambient_dim=N,
        details={"cone": cone.to_json(), "kappa": kappa, "omega": unit_ball_volume(N)})


def kappa_hat_formula(kappa, rho, r, v_norm, sigma, N) -> float:
    """Plain evaluation of the bound, for reference checks."""
    return kappa * unit_ball_volume(N) * math.exp(gaussian_radial_log((1 + r) / rho + v_norm, sigma, N))


def level_surface_curvature(field, x, u, v, grad_floor=GRADIENT_FLOOR) -> float:
    """Sectional curvature of the level set through x on the plane span(u, v).

    ``K = (A(u,u) A(v,v) - A(u,v)^2) / |grad|^2`` with ``A = -Hess``; u and v
    must be orthonormal and tangent to the level set.
    """
    ev = field.evaluate(np.asarray(x, dtype=float))
    g, H = np.asarray(ev.gradient), np.asarray(ev.hessian)
    gn = float(np.linalg.norm(g))
    if gn <= grad_floor:
        raise SingularPoint(f"gradient norm {gn:.3e} at a level-set point")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if abs(u @ g) > TANGENT_TOL * gn or abs(v @ g) > TANGENT_TOL * gn:
        raise DomainError("u and v must be tangent to the level set")
    if abs(u @ u - 1) > 1e-9 or abs(v @ v - 1) > 1e-9 or abs(u @ v) > 1e-9:
        raise DomainError("u and v must be orthonormal")
    A = -H
    return float(((u @ A @ u) * (v @ A @ v) - (u @ A @ v) ** 2) / gn ** 2)


def tangent_frame(gradient):
    """Orthonormal basis (rows) of the orthogonal complement of ``gradient``."""
    g = np.asarray(gradient, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([g, np.eye(len(g))]))
    return q[:, 1:len(g)].T


# -- length-neutral level -----------------------------------------------------

def _halfspace_profile(u):
    """E[max(u + Z, 0)^2] for standard normal Z."""
    phi = math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
    return (1 + u * u) * ndtr(u) + u * phi


def _halfspace_slope(u):
    phi = math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
    return 2.0 * (u * ndtr(u) + phi)


def rim_excess(ell: float) -> float:
    """Extra arc length (units of sigma) of the rim for a path crossing a face.

    Near an open face the smoothed field is ``sigma^2 (1 + eta^2 + G(s/sigma))``
    in units where eta = h/sigma and s is the signed distance to the face.  At
    level ``sigma^2 (1 + ell)`` the cross-section is eta = sqrt(ell - G(u)) for
    u <= u_max with G(u_max) = ell; the flat double's path folds at u = 0.
    """
    u_max = brentq(lambda u: _halfspace_profile(u) - ell, -40.0, 40.0, xtol=1e-15)

    def integrand(tau):
        # u = u_max - tau^2 removes the square-root singularity at the tip
        u = u_max - tau * tau
        rem = ell - _halfspace_profile(u)
        if rem <= 0 or tau < 1e-8:
            return math.sqrt(_halfspace_slope(u_max))  # limit at the tip
        eta = math.sqrt(rem)
        d_eta = -_halfspace_slope(u) / (2.0 * eta)
        return 2.0 * tau * (math.sqrt(1.0 + d_eta * d_eta) - 1.0)

    top = math.sqrt(u_max + 40.0)
    val, _ = quad(integrand, 0.0, top, limit=400, epsabs=1e-13, epsrel=1e-12)
    return 2.0 * (val + u_max)


@functools.lru_cache(maxsize=None)
def length_neutral_offset() -> float:
    """ell* with rim_excess(ell*) = 0."""
    return brentq(rim_excess, 1e-2, 20.0, xtol=1e-14)


def length_neutral_level(sigma: float) -> float:
    return sigma * sigma * (1.0 + length_neutral_offset())


def sheet_height(sigma: float, level: float) -> float:
    """Height of the two flat sheets of a level set far from the rim."""
    return math.sqrt(max(level - sigma * sigma, 0.0))
