"""Gaussian smoothing of the squared distance to X x {0}.

With y = (x, h) in R^{n+1} the squared distance splits as
``f(x, h) = d_X(x)^2 + h^2``, so convolving with an isotropic Gaussian of
standard deviation sigma gives

    hhat(x, h) = sigma^2 + h^2 + g(x),    g = E[d_X(x + sigma Z)^2].

Only g needs numerical work, in R^n instead of R^{n+1}; the h-part is exact
and symmetric under h -> -h bit for bit.  Derivatives are moved onto f:
grad g = E[2 (Y - proj Y)] and Hess g = E[2 Pi(Y)] with Pi the projector
onto the normal space of the face nearest to Y.

Schemes for g:

* ``polygon``  (n = 2): exact decomposition over the normal fan.  Edge
  strips are closed form; vertex wedges reduce to a 1-D angular integral
  with a closed-form radial part, done by composite Gauss-Legendre.
* ``gauss-hermite``: tensor rule with a fixed number of nodes per axis.
* ``monte-carlo``: seeded Gaussian samples with standard errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, log_ndtr, ndtr

from ..errors import DomainError
from ..polytope import Polytope
from .projection import ActiveSetProjector

LOG_2PI = math.log(2 * math.pi)
# Gauss-Hermite error estimate: safety factor on the spread of the coarser
# rules, plus a floor for points where every node lands inside X
GH_SAFETY = 2.0
GH_FLOOR = 1e-6


@dataclass
class FieldEval:
    """Value, gradient and Hessian at a batch of points (leading axis)."""

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray
    error: np.ndarray  # estimated absolute quadrature error of the value

    def __getitem__(self, i):
        return FieldEval(self.value[i], self.gradient[i], self.hessian[i], self.error[i])


class SmoothField:
    """hhat = f * Gaussian(sigma) for f the squared distance to X x {0}.

    Parameters
    ----------
    polytope : Polytope
        Compact polytope X in R^n; the field lives in R^{n+1}.
    sigma : float
        Standard deviation of the Gaussian.
    scheme : {"auto", "polygon", "gauss-hermite", "monte-carlo"}
        "auto" picks "polygon" for n = 2, "gauss-hermite" for n <= 4 and
        "monte-carlo" beyond.
    nodes : int
        Gauss-Hermite nodes per axis.
    samples, seed : int
        Monte Carlo sample count and seed.
    """

    def __init__(self, polytope: Polytope, sigma: float, scheme="auto", nodes=9,
                 samples=200000, seed=0):
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        self.polytope = polytope
        self.sigma = float(sigma)
        n = polytope.dim
        if scheme == "auto":
            scheme = "polygon" if n == 2 else ("gauss-hermite" if n <= 4 else "monte-carlo")
        self.scheme = scheme
        self.nodes = nodes
        self.samples = samples
        self.seed = seed
        if scheme == "polygon":
            self._impl = _PolygonExact(polytope, self.sigma)
        elif scheme == "gauss-hermite":
            self._impl = _TensorRule(polytope, self.sigma, *_hermite_rule(n, nodes))
            # two coarser rules for the error estimate; a single one can agree by accident
            self._coarse = [_TensorRule(polytope, self.sigma, *_hermite_rule(n, max(nodes - k, 2)))
                            for k in (1, 2)]
        elif scheme == "monte-carlo":
            rng = np.random.default_rng(seed)
            z = rng.standard_normal((samples, n))
            self._impl = _TensorRule(polytope, self.sigma, z, np.full(samples, 1.0 / samples))
        else:
            raise DomainError(f"unknown quadrature scheme {scheme!r}")

    @property
    def dim(self) -> int:
        """Ambient dimension n + 1."""
        return self.polytope.dim + 1

    def describe(self) -> dict:
        d = {"scheme": self.scheme, "sigma": self.sigma}
        if self.scheme == "gauss-hermite":
            d["nodes_per_axis"] = self.nodes
        if self.scheme == "monte-carlo":
            d.update(samples=self.samples, seed=self.seed)
        return d

    def evaluate(self, x, with_error=False) -> FieldEval:
        """Value, gradient and Hessian at one point or a batch of points."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        n = self.polytope.dim
        if X.shape[1] != n + 1:
            raise DomainError(f"points must lie in R^{n + 1}")
        base, h = X[:, :n], X[:, n]
        g, dg, hg, err = self._impl.terms(base)
        if with_error:
            if self.scheme == "gauss-hermite":
                diff = [np.abs(g - c.terms(base, order=0)[0]) for c in self._coarse]
                err = GH_SAFETY * np.maximum(*diff) + GH_FLOOR * self.sigma ** 2
            elif self.scheme == "polygon":
                err = self._impl.error(base)
        N = X.shape[0]
        value = self.sigma ** 2 + h * h + g
        grad = np.zeros((N, n + 1))
        grad[:, :n] = dg
        grad[:, n] = 2.0 * h
        hess = np.zeros((N, n + 1, n + 1))
        hess[:, :n, :n] = 0.5 * (hg + np.swapaxes(hg, 1, 2))
        hess[:, n, n] = 2.0
        out = FieldEval(value, grad, hess, err)
        return out[0] if single else out

    def value(self, x):
        return self.evaluate(x).value

    def gradient(self, x):
        return self.evaluate(x).gradient

    def hessian(self, x):
        return self.evaluate(x).hessian

    def values(self, X):
        """Values only, at a batch of points (rows)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = self.polytope.dim
        return self.sigma ** 2 + X[:, n] ** 2 + self.planar_value(X[:, :n])

    def planar_value(self, base):
        """g on a batch of base points (no h-part); used for grids."""
        return self._impl.terms(np.atleast_2d(base), order=0)[0]


class AnalyticField:
    """Field given by explicit callables; used for sanity checks (e.g. |x|^2)."""

    def __init__(self, value, gradient, hessian, dim, values=None):
        self._v, self._g, self._h = value, gradient, hessian
        self._dim = dim
        self._batch = values
        self.sigma = 0.0
        self.scheme = "analytic"

    @property
    def dim(self):
        return self._dim

    @classmethod
    def sphere(cls, dim=3):
        return cls(lambda x: float(x @ x), lambda x: 2.0 * x,
                   lambda x: 2.0 * np.eye(len(x)), dim,
                   values=lambda X: np.einsum("ij,ij->i", X, X))

    def values(self, X):
        """Values at a batch of points (rows)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._batch is not None:
            return self._batch(X)
        return np.array([self._v(x) for x in X])

    def evaluate(self, x, with_error=False):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return FieldEval(self._v(x), self._g(x), self._h(x), 0.0)
        vals = [self.evaluate(xi) for xi in x]
        return FieldEval(np.array([v.value for v in vals]), np.array([v.gradient for v in vals]),
                         np.array([v.hessian for v in vals]), np.zeros(len(vals)))

    def value(self, x):
        return self.evaluate(x).value

    def gradient(self, x):
        return self.evaluate(x).gradient

    def hessian(self, x):
        return self.evaluate(x).hessian

    def describe(self):
        return {"scheme": "analytic"}


# -- tensor rules (Gauss-Hermite, Monte Carlo) --------------------------------

def _hermite_rule(n, nodes):
    t, w = np.polynomial.hermite.hermgauss(nodes)
    z1 = math.sqrt(2.0) * t
    w1 = w / math.sqrt(math.pi)
    grids = np.meshgrid(*([z1] * n), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=1)
    wgrid = np.meshgrid(*([w1] * n), indexing="ij")
    w = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return z, w


class _TensorRule:
    """E[F(x + sigma Z)] ~ sum_k w_k F(x + sigma z_k) with F = d^2 and its derivatives."""

    def __init__(self, P: Polytope, sigma, z, w, chunk_nodes=400000):
        self.P = P
        self.sigma = sigma
        self.z = np.asarray(z, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.proj = ActiveSetProjector(P)
        self.normal_proj = self.proj.normal_projectors()
        self.chunk = max(1, chunk_nodes // len(self.w))

    def terms(self, base, order=2):
        N, n = base.shape
        g = np.zeros(N)
        dg = np.zeros((N, n))
        hg = np.zeros((N, n, n))
        var = np.zeros(N)
        for a in range(0, N, self.chunk):
            sl = slice(a, a + self.chunk)
            pts = base[sl, None, :] + self.sigma * self.z[None, :, :]
            flat = pts.reshape(-1, n)
            near, which = self.proj(flat)
            diff = (flat - near).reshape(pts.shape)
            d2 = np.sum(diff * diff, axis=2)
            g[sl] = d2 @ self.w
            var[sl] = (d2 * d2) @ self.w - g[sl] ** 2
            if order >= 1:
                dg[sl] = 2.0 * np.einsum("k,pki->pi", self.w, diff)
            if order >= 2:
                wp = which.reshape(pts.shape[:2])
                hg[sl] = 2.0 * np.einsum("k,pkij->pij", self.w, self.normal_proj[wp])
        self.last_std_error = np.sqrt(np.maximum(var, 0.0) / len(self.w))
        return g, dg, hg, self.last_std_error


# -- exact polygon scheme -----------------------------------------------------

def _log_phi(u):
    return -0.5 * u * u - 0.5 * LOG_2PI


def _interval_prob(lo, hi):
    """P(lo <= Z <= hi) for standard normal Z, accurate in both tails."""
    right = lo > 0
    a = np.where(right, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))
    return np.maximum(a, 0.0)


def _half_line_moments(u):
    """E[(Z-u)^k ; Z >= u] for k = 0, 1, 2 without tail cancellation."""
    big = u > 0
    ub = np.where(big, u, 0.0)
    # scaled by exp(u^2/2) on the right tail
    r = 0.5 * erfcx(ub / math.sqrt(2.0))          # Q(u) e^{u^2/2}
    c = 1.0 / math.sqrt(2 * math.pi)               # phi(u) e^{u^2/2}
    scale = np.exp(-0.5 * ub * ub)
    m0_r = r * scale
    m1_r = (c - ub * r) * scale
    m2_r = ((1 + ub * ub) * r - ub * c) * scale
    ul = np.where(big, 0.0, u)
    q = ndtr(-ul)
    ph = np.exp(_log_phi(ul))
    m0_l = q
    m1_l = ph - ul * q
    m2_l = (1 + ul * ul) * q - ul * ph
    return (np.where(big, m0_r, m0_l), np.maximum(np.where(big, m1_r, m1_l), 0.0),
            np.maximum(np.where(big, m2_r, m2_l), 0.0))


class _PolygonExact:
    """Normal-fan decomposition of E[d_X(x + sigma Z)^2] for a convex polygon."""

    GL_NODES = 8

    def __init__(self, P: Polytope, sigma):
        if P.dim != 2:
            raise DomainError("the polygon scheme needs a planar polytope")
        self.P = P
        self.sigma = sigma
        verts = P.vertices
        inc = P.face_adjacency
        center = verts.mean(axis=0)
        order = np.argsort(np.arctan2(*(verts - center).T[::-1]))
        verts = verts[order]
        inc = [inc[i] for i in order]
        m = len(verts)
        self.edges = []
        for i in range(m):
            shared = sorted(inc[i] & inc[(i + 1) % m])
            if not shared:
                raise DomainError("could not match polygon edges to half-spaces")
            j = shared[0]
            nrm = P.normals[j]
            tau = np.array([-nrm[1], nrm[0]])
            a, b = tau @ verts[i], tau @ verts[(i + 1) % m]
            self.edges.append((nrm, P.offsets[j], tau, min(a, b), max(a, b)))
        self.wedges = []
        for i in range(m):
            v = verts[(i + 1) % m]
            n_in = self.edges[i][0]
            n_out = self.edges[(i + 1) % m][0]
            a0 = math.atan2(n_in[1], n_in[0])
            ext = (math.atan2(n_out[1], n_out[0]) - a0) % (2 * math.pi)
            self.wedges.append((v, a0, ext))
        self.vertices = verts
        t, w = np.polynomial.legendre.leggauss(self.GL_NODES)
        self._gl = (t, w)
        t5, w5 = np.polynomial.legendre.leggauss(5)
        self._gl_coarse = (t5, w5)

    def error(self, base):
        fine = self.terms(base, order=0)[0]
        coarse = self.terms(base, order=0, rule=self._gl_coarse)[0]
        return np.abs(fine - coarse)

    def terms(self, base, order=2, rule=None):
        s = self.sigma
        N = base.shape[0]
        g = np.zeros(N)
        dg = np.zeros((N, 2))
        hg = np.zeros((N, 2, 2))
        for nrm, c, tau, a, b in self.edges:
            u = (c - base @ nrm) / s
            t0 = base @ tau
            pt = _interval_prob((a - t0) / s, (b - t0) / s)
            m0, m1, m2 = _half_line_moments(u)
            g += s * s * m2 * pt
            if order >= 1:
                dg += 2.0 * s * (m1 * pt)[:, None] * nrm
            if order >= 2:
                hg += 2.0 * (m0 * pt)[:, None, None] * np.outer(nrm, nrm)
        for v, a0, ext in self.wedges:
            p0, p1, p2 = self._wedge(base - v, a0, ext, rule or self._gl)
            g += p2
            if order >= 1:
                dg += 2.0 * p1
            if order >= 2:
                hg += 2.0 * p0[:, None, None] * np.eye(2)
        return g, dg, hg, np.zeros(N)

    def _wedge(self, w, a0, ext, rule):
        """Integrals of |Y-v|^k-type moments over the wedge v + cone(a0, a0+ext).

        Returns (probability, E[(Y - v); wedge], E[|Y - v|^2; wedge]).
        """
        s = self.sigma
        N = w.shape[0]
        r = np.linalg.norm(w, axis=1)
        panels = np.ceil(2.0 * ext * np.maximum(r, s) / s).astype(int) + 2
        # group points by panel count rounded up to a power of two
        levels = np.ceil(np.log2(panels)).astype(int)
        p0 = np.zeros(N)
        p1 = np.zeros((N, 2))
        p2 = np.zeros(N)
        t, wt = rule
        for lev in np.unique(levels):
            idx = np.flatnonzero(levels == lev)
            npan = 2 ** int(lev)
            edges = a0 + ext * np.arange(npan + 1) / npan
            mid = 0.5 * (edges[1:] + edges[:-1])
            half = 0.5 * ext / npan
            alpha = (mid[:, None] + half * t[None, :]).ravel()
            weight = np.tile(half * wt, npan)
            om = np.stack([np.cos(alpha), np.sin(alpha)], axis=1)
            step = max(1, 2_000_000 // alpha.size)
            for a in range(0, idx.size, step):
                ii = idx[a:a + step]
                d0, d2v, d3 = self._radial(w[ii], r[ii], om)
                p0[ii] = d0 @ weight
                p1[ii] = np.einsum("pk,k,ki->pi", d2v, weight, om)
                p2[ii] = d3 @ weight
        return p0, p1, p2

    def _radial(self, w, r, om):
        """Angular densities of the radial integrals r^1, r^2, r^3 (log-safe)."""
        s = self.sigma
        m = w @ om.T                         # (p, k) projection of w on each ray
        mu = m / s
        lw = -0.5 * (r * r)[:, None] / (s * s)
        lnorm = -math.log(2 * math.pi * s * s)
        hi = mu > 20.0
        # left/moderate branch, scaled by exp(mu^2/2)
        mu_l = np.where(hi, 0.0, mu)
        m_l = s * mu_l
        J0 = s * math.sqrt(2 * math.pi) * 0.5 * erfcx(-mu_l / math.sqrt(2.0))
        J1 = m_l * J0 + s * s
        J2 = m_l * J1 + s * s * J0
        J3 = m_l * J2 + 2 * s * s * J1
        with np.errstate(divide="ignore"):
            L1 = lw + np.log(np.maximum(J1, 0.0))
            L2 = lw + np.log(np.maximum(J2, 0.0))
            L3 = lw + np.log(np.maximum(J3, 0.0))
        # right branch: unscaled integrals times exp(-p^2/2s^2)
        mu_h = np.where(hi, mu, 30.0)
        m_h = s * mu_h
        lp = lw + 0.5 * mu_h * mu_h
        I0 = s * math.sqrt(2 * math.pi) * ndtr(mu_h)
        e = np.exp(-0.5 * mu_h * mu_h)
        I1 = m_h * I0 + s * s * e
        I2 = m_h * I1 + s * s * I0
        I3 = m_h * I2 + 2 * s * s * I1
        H1 = lp + np.log(I1)
        H2 = lp + np.log(I2)
        H3 = lp + np.log(I3)
        d1 = np.exp(lnorm + np.where(hi, H1, L1))
        d2 = np.exp(lnorm + np.where(hi, H2, L2))
        d3 = np.exp(lnorm + np.where(hi, H3, L3))
        return d1, d2, d3
