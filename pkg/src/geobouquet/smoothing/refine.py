"""Broken-geodesic model of a bouquet on a smoothed double.

Each loop is replaced by a closed chain of short chords.  The basepoint is
free on the surface; every interior vertex is confined to the slice of the
surface by an affine plane through its initial position, orthogonal to the
initial chain tangent (a "disk" of radius delta).  The total chord length
is minimized over these coordinates and the reduced Hessian at the minimum
decides stability: it is positive definite iff no variation keeps the
length fixed to second order.

Two models share the machinery:

* ``flat``: the unsmoothed double, each loop in its own unfolded chart
  (straight line from p to p + L t0, basepoint displacement d seen as
  P^T d at the far end);
* ``surface``: the level set ``{hhat = level}`` in R^{n+1}, with chain
  vertices transferred from the flat bouquet along rays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..double import parallel_transport
from ..errors import DomainError, EscapedDisks, NoConvergence
from ..stability import Bouquet, Verdict
from .certificates import length_neutral_level, sheet_height

GRAD_RTOL = 1e-8          # stop when |reduced gradient| < GRAD_RTOL * length
FD_REL_STEP = 1e-4        # finite-difference step relative to delta
NOISE_FACTOR = 10.0       # lambda_min must beat the noise floor by this factor
RIM_WIDTH = 3.0           # rays tilt towards the face normal within RIM_WIDTH * sigma
SURFACE_TOL = 1e-12
MAX_NEWTON = 200


# -- chain sampling and transfer ----------------------------------------------

def chain_times(length, breaks, m, sigma=None):
    """Arclength samples in (0, length): m uniform ones plus clusters at the breaks.

    Around each collision (at arclength b) extra samples are placed every
    sigma/4 within 3 sigma, where the smoothed surface bends sharply.
    """
    if m < 8:
        raise DomainError("need at least 8 chain vertices per loop")
    s = list(length * np.arange(1, m) / m)
    if sigma:
        width = RIM_WIDTH * sigma
        s = [t for t in s if min(abs(t - b) for b in breaks) > width]
        for b in breaks:
            s.extend(b + sigma * np.arange(-12, 13) / 4.0)
    s = np.unique(np.round(np.asarray(s), 15))
    s = s[(s > 1e-9 * length) & (s < length * (1 - 1e-9))]
    return s


@dataclass
class FlatSample:
    """A point of a flat loop: base point, sheet sign and nearest collision face."""

    x: np.ndarray
    sign: float
    face: int
    face_distance: float


def sample_loop(P, loop, s):
    T = loop.trajectory
    cum = np.concatenate([[0.0], np.cumsum(T.segment_lengths)])
    dirs = T.directions
    out = []
    for t in s:
        k = int(np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(dirs) - 1))
        x = T.points[k] + (t - cum[k]) * dirs[k]
        sign = 1.0 if (k + loop.start_sheet) % 2 == 0 else -1.0
        if T.n_collisions:
            i = int(np.argmin(np.abs(cum[1:-1] - t)))
            f = T.faces[i]
            d = float(P.offsets[f] - P.normals[f] @ x)
        else:
            f, d = -1, math.inf
        out.append(FlatSample(x, sign, f, max(d, 0.0)))
    return out


def transfer(field, level, samples, rim_width=RIM_WIDTH):
    """Move flat samples onto the level set along tilted rays.

    Far from the collision face the ray is vertical (up on the top sheet,
    down on the bottom one).  Within ``rim_width * sigma`` of the face it
    turns linearly in angle towards the outward face normal, which it
    reaches at the face itself, so both sheets meet on the rim.
    """
    P = field.polytope
    n = P.dim
    sigma = field.sigma
    A = rim_width * sigma
    O = np.array([np.append(smp.x, 0.0) for smp in samples])
    D = np.zeros_like(O)
    for i, smp in enumerate(samples):
        alpha = 0.5 * math.pi * max(0.0, 1.0 - smp.face_distance / A) if smp.face >= 0 else 0.0
        D[i, n] = smp.sign * math.cos(alpha)
        if smp.face >= 0:
            D[i, :n] += math.sin(alpha) * P.normals[smp.face]
    t = _ray_roots(field, level, O, D, sigma)
    return O + t[:, None] * D


def _ray_roots(field, level, O, D, sigma):
    """Outer crossing of {hhat = level} along each ray o + t d (vectorized)."""
    def val(t):
        return field.values(O + t[:, None] * D) - level
    N = len(O)
    lo = np.zeros(N)
    f_lo = val(lo)
    for _ in range(60):
        bad = f_lo >= 0
        if not bad.any():
            break
        lo[bad] -= sigma
        f_lo[bad] = val(lo)[bad]
    hi = np.full(N, math.sqrt(max(level, 0.0)) + 4 * sigma)
    f_hi = val(hi)
    for _ in range(60):
        bad = f_hi <= 0
        if not bad.any():
            break
        hi[bad] *= 2.0
        f_hi[bad] = val(hi)[bad]
    if (f_lo >= 0).any() or (f_hi <= 0).any():
        raise DomainError("could not bracket the level set along a transfer ray")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = val(mid)
        up = fm > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.max(hi - lo) < 1e-15 * max(1.0, np.max(np.abs(hi))):
            break
    return 0.5 * (lo + hi)


def _complement_basis(vectors, N):
    """Orthonormal basis (columns) of the orthogonal complement of ``vectors``."""
    V = np.atleast_2d(vectors)
    q, _ = np.linalg.qr(np.column_stack([V.T, np.eye(N)]))
    return q[:, V.shape[0]:N]


# -- configuration models -----------------------------------------------------

@dataclass
class _State:
    w: np.ndarray        # vertex points (V, N)
    J: list              # vertex Jacobians (N, d_v)
    curv: list           # (normal, second-derivative matrix) or None


class _ChainModel:
    """Shared bookkeeping: vertices, variables, and per-loop slots.

    A slot is one position in a chain; its point is ``anchor + R w_v`` for
    the vertex v it refers to.  Vertex 0 is the basepoint.
    """

    def setup(self, dims, loops_slots, N):
        self.dims = np.asarray(dims)
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])
        self.n_vars = int(self.offsets[-1])
        self.loops_slots = loops_slots      # per loop: list of (v, anchor, R)
        self.N = N

    def split(self, z):
        return [z[self.offsets[v]:self.offsets[v + 1]] for v in range(len(self.dims))]

    def vertex_of(self, q):
        return int(np.searchsorted(self.offsets, q, side="right") - 1)

    def chains(self, st: _State):
        out = []
        for slots in self.loops_slots:
            out.append(np.array([anc + R @ st.w[v] for v, anc, R in slots]))
        return out

    def length(self, st):
        return float(sum(np.sum(np.linalg.norm(np.diff(Y, axis=0), axis=1)) for Y in self.chains(st)))

    def _slot_forces(self, Y):
        d = np.diff(Y, axis=0)
        ell = np.linalg.norm(d, axis=1)
        u = d / ell[:, None]
        G = np.zeros_like(Y)
        G[:-1] -= u
        G[1:] += u
        return G, u, ell

    def gradient(self, st):
        g = np.zeros(self.n_vars)
        for slots, Y in zip(self.loops_slots, self.chains(st)):
            G, _, _ = self._slot_forces(Y)
            for (v, _, R), Gs in zip(slots, G):
                a = self.offsets[v]
                g[a:a + self.dims[v]] += (R @ st.J[v]).T @ Gs
        return g

    def hessian(self, st):
        H = np.zeros((self.n_vars, self.n_vars))
        for slots, Y in zip(self.loops_slots, self.chains(st)):
            G, u, ell = self._slot_forces(Y)
            Js = [R @ st.J[v] for v, _, R in slots]
            for k in range(len(ell)):
                K = (np.eye(self.N) - np.outer(u[k], u[k])) / ell[k]
                for i, j, sgn in ((k, k, 1.0), (k + 1, k + 1, 1.0), (k, k + 1, -1.0), (k + 1, k, -1.0)):
                    vi, vj = slots[i][0], slots[j][0]
                    a, b = self.offsets[vi], self.offsets[vj]
                    H[a:a + self.dims[vi], b:b + self.dims[vj]] += sgn * Js[i].T @ K @ Js[j]
            for (v, _, R), Gs in zip(slots, G):
                if st.curv[v] is None:
                    continue
                nu, caa = st.curv[v]
                a = self.offsets[v]
                H[a:a + self.dims[v], a:a + self.dims[v]] += float(Gs @ (R @ nu)) * caa
        return 0.5 * (H + H.T)


class FlatModel(_ChainModel):
    """Chains in the unfolded charts of the flat double."""

    def __init__(self, B: Bouquet, m=16):
        P = B.polytope
        n = P.dim
        p = B.basepoint
        dims = [n]
        loops_slots = []
        self.bases = [np.zeros((n, n))]
        self.times = []
        for lp in B.loops:
            ell, t0 = lp.length, lp.t0
            M = parallel_transport(P, lp.trajectory)
            Bt = _complement_basis(t0, n)
            s = chain_times(ell, [], m)
            self.times.append(s)
            slots = [(0, p.copy(), np.eye(n))]
            for t in s:
                dims.append(n - 1)
                self.bases.append(Bt)
                slots.append((len(dims) - 1, p + t * t0, np.eye(n)))
            slots.append((0, p + ell * t0, M.T))
            loops_slots.append(slots)
        self.setup(dims, loops_slots, n)
        self.bases[0] = np.eye(n)

    def embed(self, z):
        parts = self.split(z)
        w = [self.bases[v] @ a for v, a in enumerate(parts)]
        return _State(np.array(w), list(self.bases), [None] * len(parts))

    def embed_local(self, st, z, v):
        w = st.w.copy()
        w[v] = self.bases[v] @ self.split(z)[v]
        return _State(w, st.J, st.curv)


class SurfaceModel(_ChainModel):
    """Chains on the level set ``{field = level}`` with vertices in planar slices."""

    def __init__(self, field, level, B: Bouquet, m=16, rim_width=RIM_WIDTH):
        P = B.polytope
        if field.polytope is not P and not field.polytope.same_as(P):
            raise DomainError("field and bouquet use different polytopes")
        N = P.dim + 1
        self.field = field
        self.level = float(level)
        base_smp = sample_loop(P, B.loops[0], [0.0])
        pts = [base_smp[0]]
        self.flat_chains = []
        for lp in B.loops:
            T = lp.trajectory
            cum = np.concatenate([[0.0], np.cumsum(T.segment_lengths)])
            s = chain_times(lp.length, list(cum[1:-1]), m, field.sigma)
            smp = sample_loop(P, lp, s)
            pts.extend(smp)
            self.flat_chains.append(np.vstack([B.basepoint, [q.x for q in smp], B.basepoint]))
        self.samples = pts
        self.initial = transfer(field, level, pts, rim_width)
        self.chain_index = []
        k = 1
        for Y in self.flat_chains:
            cnt = len(Y) - 2
            self.chain_index.append([0] + list(range(k, k + cnt)) + [0])
            k += cnt
        dims = [N - 1] + [N - 2] * (k - 1)
        loops_slots = [[(v, np.zeros(N), np.eye(N)) for v in idx] for idx in self.chain_index]
        self.setup(dims, loops_slots, N)
        self.recenter(self.initial)

    def recenter(self, y0):
        """Put the disks at the points ``y0`` (on the surface), orthogonal to the chain."""
        N = self.N
        ev = self.field.evaluate(y0)
        grads = np.atleast_2d(ev.gradient)
        normals = grads / np.linalg.norm(grads, axis=1, keepdims=True)
        bases = [None] * len(y0)
        bases[0] = _complement_basis(normals[0], N)
        for idx in self.chain_index:
            for j in range(1, len(idx) - 1):
                v = idx[j]
                tau = y0[idx[j + 1]] - y0[idx[j - 1]]
                nu = normals[v]
                tau = tau - (tau @ nu) * nu
                bases[v] = _complement_basis(np.vstack([nu, tau / np.linalg.norm(tau)]), N)
        self.centers = np.array(y0, dtype=float)
        self.normals = normals
        self.bases = bases

    def _solve(self, vs, parts, c0=None):
        """Points y = center + B a + c nu on the level set, for vertices ``vs``."""
        C = self.centers[vs]
        NU = self.normals[vs]
        base = C + np.array([self.bases[v] @ parts[i] for i, v in enumerate(vs)])
        c = np.zeros(len(vs)) if c0 is None else np.array(c0, dtype=float)
        for _ in range(60):
            Y = base + c[:, None] * NU
            ev = self.field.evaluate(Y)
            r = np.atleast_1d(ev.value) - self.level
            slope = np.einsum("ij,ij->i", np.atleast_2d(ev.gradient), NU)
            if np.any(slope <= 0):
                raise EscapedDisks("a disk no longer crosses the surface transversally")
            dc = r / slope
            c = c - dc
            if np.max(np.abs(dc)) < 1e-15 * max(1.0, float(np.max(np.abs(c)))):
                break
        else:
            raise NoConvergence("level-set projection stalled", residual=float(np.max(np.abs(r))))
        Y = base + c[:, None] * NU
        ev = self.field.evaluate(Y)
        return Y, np.atleast_2d(ev.gradient), np.atleast_3d(ev.hessian), c

    def _vertex_data(self, v, y, g, H):
        Bv = self.bases[v]
        nu = self.normals[v]
        gn = g @ nu
        ca = -(g @ Bv) / gn
        J = Bv + np.outer(nu, ca)
        caa = -(J.T @ H @ J) / gn
        return J, (nu, caa)

    def embed(self, z):
        parts = self.split(z)
        vs = list(range(len(parts)))
        Y, G, H, _ = self._solve(vs, parts)
        J, curv = [], []
        for v in vs:
            Jv, cv = self._vertex_data(v, Y[v], G[v], H[v])
            J.append(Jv)
            curv.append(cv)
        return _State(Y, J, curv)

    def embed_local(self, st, z, v):
        part = self.split(z)[v]
        Y, G, H, _ = self._solve([v], [part])
        w = st.w.copy()
        w[v] = Y[0]
        J = list(st.J)
        curv = list(st.curv)
        J[v], curv[v] = self._vertex_data(v, Y[0], G[0], H[0])
        return _State(w, J, curv)

    def level_residual(self, st):
        return float(np.max(np.abs(self.field.values(st.w) - self.level)))

    def disk_residual(self, st, delta):
        """Largest out-of-plane offset of an interior vertex relative to delta."""
        worst = 0.0
        for v in range(1, len(self.dims)):
            d = st.w[v] - self.centers[v]
            tau = _complement_basis(np.column_stack([self.bases[v], self.normals[v]]).T, self.N)
            worst = max(worst, float(np.max(np.abs(tau.T @ d))) / delta)
        return worst


# -- minimization and Hessian -------------------------------------------------

@dataclass
class BrokenBouquet:
    basepoint: np.ndarray
    chains: list
    disks: list
    delta: float
    level: float | None

    @property
    def lengths(self):
        return [float(np.sum(np.linalg.norm(np.diff(Y, axis=0), axis=1))) for Y in self.chains]

    @property
    def length(self):
        return float(sum(self.lengths))

    def to_json(self):
        return {"basepoint": self.basepoint.tolist(), "delta": self.delta, "level": self.level,
                "chains": [Y.tolist() for Y in self.chains], "lengths": self.lengths}


@dataclass
class RefineResult:
    broken: BrokenBouquet
    z: np.ndarray
    flat_length: float
    length: float
    gradient_norm: float
    relative_gradient: float
    iterations: int
    fd_spectrum: np.ndarray
    analytic_spectrum: np.ndarray
    noise_floor: float
    lambda_min: float
    verdict: Verdict
    max_disk_offset: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def relative_length_change(self):
        return (self.length - self.flat_length) / self.flat_length

    def to_json(self, include_chains=False):
        out = {"verdict": self.verdict.value, "lambda_min": self.lambda_min,
               "noise_floor": self.noise_floor, "flat_length": self.flat_length,
               "length": self.length, "relative_length_change": self.relative_length_change,
               "gradient_norm": self.gradient_norm, "relative_gradient": self.relative_gradient,
               "iterations": self.iterations, "max_disk_offset": self.max_disk_offset,
               "spectrum": self.fd_spectrum.tolist(),
               "analytic_lambda_min": float(self.analytic_spectrum[0]),
               "delta": self.broken.delta, "level": self.broken.level,
               "diagnostics": self.diagnostics,
               "tolerances": {"gradient_rtol": GRAD_RTOL, "fd_step": FD_REL_STEP * self.broken.delta,
                              "noise_factor": NOISE_FACTOR, "surface_tol": SURFACE_TOL}}
        if include_chains:
            out["broken_bouquet"] = self.broken.to_json()
        return out


def _max_offset(model, z):
    parts = model.split(z)
    return max((float(np.linalg.norm(a)) for a in parts[1:]), default=0.0)


def minimize_chain(model, z0, delta, max_iter=MAX_NEWTON, grad_rtol=GRAD_RTOL):
    """Newton's method with backtracking on the reduced coordinates.

    Steps that would push an interior vertex out of its disk are shortened;
    ending on a disk boundary raises EscapedDisks.
    """
    z = np.array(z0, dtype=float)
    st = model.embed(z)
    Lz = model.length(st)
    for it in range(max_iter):
        g = model.gradient(st)
        gn = float(np.linalg.norm(g))
        if gn < grad_rtol * Lz:
            return z, st, it, gn, Lz
        H = model.hessian(st)
        lam = np.linalg.eigvalsh(H)
        shift = 0.0 if lam[0] > 1e-12 * lam[-1] else (-lam[0] + 1e-6 * abs(lam[-1]))
        step = -np.linalg.solve(H + shift * np.eye(len(z)), g)
        alpha = 1.0
        accepted = False
        for _ in range(60):
            trial = z + alpha * step
            if _max_offset(model, trial) < delta:
                try:
                    st_t = model.embed(trial)
                except (EscapedDisks, NoConvergence):
                    st_t = None
                if st_t is not None:
                    L_t = model.length(st_t)
                    if L_t <= Lz + 1e-4 * alpha * (g @ step):
                        accepted = True
                    elif abs(L_t - Lz) <= 64 * np.finfo(float).eps * Lz:
                        # at round-off level the length no longer discriminates
                        accepted = np.linalg.norm(model.gradient(st_t)) < gn
                    if accepted:
                        z, st, Lz = trial, st_t, L_t
                        break
            alpha *= 0.5
        if not accepted:
            if _max_offset(model, z + step) >= delta:
                raise EscapedDisks(f"a chain vertex reaches its disk boundary (delta {delta:.3e})")
            raise NoConvergence("line search failed", residual=gn)
    raise NoConvergence(f"no convergence in {max_iter} Newton steps", residual=gn)


def minimize_recentering(model: "SurfaceModel", delta, max_iter=2000, grad_rtol=GRAD_RTOL):
    """Newton steps of size at most delta, re-centering the disks after each.

    Every step is taken in the disks through the current chain; the accepted
    chain becomes the new set of disk centers, so at convergence the disks
    are orthogonal to the final bouquet and every vertex sits at its center.
    """
    zero = np.zeros(model.n_vars)
    st = model.embed(zero)
    Lz = model.length(st)
    for it in range(max_iter):
        g = model.gradient(st)
        gn = float(np.linalg.norm(g))
        if gn < grad_rtol * Lz:
            return zero, st, it, gn, Lz
        H = model.hessian(st)
        lam = np.linalg.eigvalsh(H)
        shift = 0.0 if lam[0] > 1e-12 * lam[-1] else (-lam[0] + 1e-6 * abs(lam[-1]))
        step = -np.linalg.solve(H + shift * np.eye(model.n_vars), g)
        big = max(_max_offset(model, step), float(np.linalg.norm(step[:model.dims[0]])))
        if big > delta:
            step *= delta / big
        alpha = 1.0
        for _ in range(40):
            try:
                st_t = model.embed(alpha * step)
            except (EscapedDisks, NoConvergence):
                st_t = None
            if st_t is not None:
                L_t = model.length(st_t)
                if L_t <= Lz + 1e-4 * alpha * (g @ step):
                    break
                if abs(L_t - Lz) <= 64 * np.finfo(float).eps * Lz:
                    if np.linalg.norm(model.gradient(st_t)) < gn:
                        break
            alpha *= 0.5
        else:
            raise NoConvergence("line search failed", residual=gn)
        model.recenter(st_t.w)
        st = model.embed(zero)
        Lz = model.length(st)
    raise NoConvergence(f"no convergence in {max_iter} steps", residual=gn)


def fd_hessian(model, z, st, h):
    """Central differences of the reduced gradient, one vertex moved at a time."""
    n = model.n_vars
    H = np.zeros((n, n))
    for q in range(n):
        v = model.vertex_of(q)
        e = np.zeros(n)
        e[q] = h
        gp = model.gradient(model.embed_local(st, z + e, v))
        gm = model.gradient(model.embed_local(st, z - e, v))
        H[:, q] = (gp - gm) / (2 * h)
    return H


def _hessian_verdict(model, z, st, delta):
    h = FD_REL_STEP * delta
    Hfd = fd_hessian(model, z, st, h)
    asym = float(np.max(np.abs(Hfd - Hfd.T)))
    Hs = 0.5 * (Hfd + Hfd.T)
    spec = np.linalg.eigvalsh(Hs)
    an = np.linalg.eigvalsh(model.hessian(st))
    noise = asym
    lam = float(spec[0])
    if lam > NOISE_FACTOR * noise and lam > 0:
        verdict = Verdict.STABLE
    elif lam < -NOISE_FACTOR * noise:
        verdict = Verdict.UNSTABLE
    else:
        verdict = Verdict.INDETERMINATE
    return spec, an, noise, lam, verdict, float(np.max(np.abs(Hs - model.hessian(st))))


def default_delta(model):
    """A quarter of the shortest chord of the initial chains."""
    st = model.embed(np.zeros(model.n_vars))
    return 0.25 * min(float(np.min(np.linalg.norm(np.diff(Y, axis=0), axis=1)))
                      for Y in model.chains(st))


def refine_flat(B: Bouquet, m=16, delta=None, start=None):
    """Minimize the chain length in the flat double and inspect its Hessian.

    ``start`` is an optional initial displacement of the reduced coordinates
    (to check that the minimizer returns to the flat bouquet).
    """
    model = FlatModel(B, m)
    delta = default_delta(model) if delta is None else float(delta)
    z0 = np.zeros(model.n_vars) if start is None else np.asarray(start, dtype=float)
    z, st, it, gn, L = minimize_chain(model, z0, delta)
    spec, an, noise, lam, verdict, gap = _hessian_verdict(model, z, st, delta)
    chains = model.chains(st)
    broken = BrokenBouquet(B.basepoint + st.w[0], chains, [], delta, None)
    return RefineResult(broken, z, B.length, L, gn, gn / L, it, spec, an, noise, lam, verdict,
                        _max_offset(model, z), {"fd_vs_analytic": gap, "n_vars": model.n_vars,
                                                "model": "flat"})


def refine_bouquet(field, B: Bouquet, level=None, m=16, delta=None, rim_width=RIM_WIDTH):
    """Refine a flat bouquet into a stationary broken bouquet on ``{field = level}``.

    ``level`` defaults to the length-neutral level.  Returns a RefineResult
    whose verdict comes from the finite-difference reduced Hessian.
    """
    if level is None:
        level = length_neutral_level(field.sigma)
    model = SurfaceModel(field, level, B, m, rim_width)
    delta = default_delta(model) if delta is None else float(delta)
    z, st, it, gn, L = minimize_recentering(model, delta)
    spec, an, noise, lam, verdict, gap = _hessian_verdict(model, z, st, delta)
    chains = model.chains(st)
    disks = [{"center": model.centers[v].tolist(), "normal": model.normals[v].tolist()}
             for v in range(1, len(model.dims))]
    broken = BrokenBouquet(st.w[0], chains, disks, delta, float(level))
    diag = {"fd_vs_analytic": gap, "n_vars": model.n_vars, "model": "surface",
            "level_residual": model.level_residual(st),
            "disk_residual": model.disk_residual(st, delta),
            "sheet_height": sheet_height(field.sigma, level),
            "injectivity": injectivity_ratio(model),
            "transfer_offset": float(np.max(np.linalg.norm(st.w - model.initial, axis=1))),
            "field": field.describe()}
    return RefineResult(broken, z, B.length, L, gn, gn / L, it, spec, an, noise, lam, verdict,
                        _max_offset(model, z), diag)


def injectivity_ratio(model: SurfaceModel) -> float:
    """min over sample pairs of |transferred distance| / |flat distance along the double|.

    Flat distances are only compared within one loop (arclength gap), which
    is a lower bound on how much the transfer may shrink distances.
    """
    worst = math.inf
    k = 1
    for Y in model.flat_chains:
        cnt = len(Y) - 2
        pts = model.initial[k:k + cnt]
        seg = np.linalg.norm(np.diff(Y, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])[1:-1]
        d_surf = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        d_flat = np.abs(s[:, None] - s[None])
        mask = (d_flat > 0) & (d_flat < 0.25 * s[-1])
        if mask.any():
            worst = min(worst, float(np.min(d_surf[mask] / d_flat[mask])))
        k += cnt
    return worst


def metric_distortion(field, level, segments, samples=200, rim_width=RIM_WIDTH):
    """Max relative length change of short flat segments after transfer.

    ``segments`` is a list of (start, end, sign) in the base polytope with
    sign +1/-1 for the top/bottom sheet; segments may cross one face, in
    which case they are folded there like a billiard path.
    """
    P = field.polytope
    worst = 0.0
    for a, b, sign in segments:
        a, b = np.asarray(a, float), np.asarray(b, float)
        t = np.linspace(0.0, 1.0, samples)
        smp = []
        for x in a[None] + t[:, None] * (b - a)[None]:
            s = P.slacks(x)
            f = int(np.argmin(s))  # nearest face, or the one crossed
            xx, sg = x, sign
            if s[f] < 0:
                xx = P.reflect_point(f, x)
                sg = -sign
            smp.append(FlatSample(xx, sg, f, float(max(P.slacks(xx)[f], 0.0))))
        Y = transfer(field, level, smp, rim_width)
        L = float(np.sum(np.linalg.norm(np.diff(Y, axis=0), axis=1)))
        flat = float(np.linalg.norm(b - a))
        worst = max(worst, abs(L / flat - 1.0))
    return worst
