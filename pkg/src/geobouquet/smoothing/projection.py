"""Nearest-point projection onto X x {0} for a polytope X.

Three routes with the same answer: cyclic Dykstra iterations (the primary
one), brute force over all faces, and a vectorized active-set solver used
inside quadrature loops.  The last one also reports which face the nearest
point lies on, which gives the a.e. Hessian of the squared distance.
"""
from __future__ import annotations

import itertools

import numpy as np

from ..errors import NoConvergence
from ..polytope import Polytope

DYKSTRA_TOL = 1e-11
DYKSTRA_MAX_SWEEPS = 100000


def dykstra(P: Polytope, points, tol=DYKSTRA_TOL, max_sweeps=DYKSTRA_MAX_SWEEPS):
    """Project points (rows) onto P by Dykstra's cyclic half-space projections."""
    x = np.array(np.atleast_2d(points), dtype=float)
    m = P.n_faces
    incr = np.zeros((m,) + x.shape)
    for sweep in range(max_sweeps):
        x_old = x.copy()
        incr_old = incr.copy()
        for j in range(m):
            y = x + incr[j]
            viol = np.maximum(y @ P.normals[j] - P.offsets[j], 0.0)
            x = y - viol[:, None] * P.normals[j]
            incr[j] = y - x
        # x alone can creep while the corrections are still moving
        change = max(np.max(np.abs(x - x_old)), np.max(np.abs(incr - incr_old)))
        if change < tol:
            return x
    raise NoConvergence(f"Dykstra did not converge in {max_sweeps} sweeps",
                        residual=float(change))


def _face_systems(P: Polytope):
    # every subset of at most n constraints with independent normals
    n = P.dim
    out = []
    for k in range(1, n + 1):
        for S in itertools.combinations(range(P.n_faces), k):
            N = P.normals[list(S)]
            G = N @ N.T
            if np.linalg.matrix_rank(G, tol=1e-10) < k:
                continue
            Ginv = np.linalg.inv(G)
            out.append((list(S), N, Ginv, N.T @ Ginv @ N))
    return out


def project_brute(P: Polytope, points):
    """Nearest point by trying every face's affine hull and keeping the best feasible one."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    best = x.copy()
    best_d = np.where(np.all(x @ P.normals.T <= P.offsets + 1e-12, axis=1), 0.0, np.inf)
    for S, N, Ginv, _ in _face_systems(P):
        lam = (x @ N.T - P.offsets[S]) @ Ginv
        cand = x - lam @ N
        ok = np.all(cand @ P.normals.T <= P.offsets + 1e-10, axis=1)
        d = np.where(ok, np.sum((x - cand) ** 2, axis=1), np.inf)
        better = d < best_d
        best[better] = cand[better]
        best_d[better] = d[better]
    return best


class ActiveSetProjector:
    """Vectorized projection via the KKT conditions, one face system at a time.

    For a point y the nearest point is ``y - N_S^T lam`` for the unique face
    system S with ``lam >= 0`` and a feasible candidate.  Systems are tried
    in order of size; each point is settled by the first system that passes.
    """

    def __init__(self, P: Polytope, chunk=200000):
        self.P = P
        self.systems = _face_systems(P)
        self.chunk = chunk

    def __call__(self, points):
        """Return (nearest points, normal-space projectors index)."""
        y = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty_like(y)
        which = np.full(y.shape[0], -1, dtype=np.int64)
        for a in range(0, y.shape[0], self.chunk):
            sl = slice(a, a + self.chunk)
            out[sl], which[sl] = self._solve(y[sl])
        return out, which

    def _solve(self, y):
        P = self.P
        res = y.copy()
        which = np.full(y.shape[0], -1, dtype=np.int64)
        s = y @ P.normals.T - P.offsets
        todo = np.flatnonzero(np.any(s > 0, axis=1))
        for idx, (S, N, Ginv, _) in enumerate(self.systems):
            if todo.size == 0:
                break
            yt = y[todo]
            lam = (s[todo][:, S]) @ Ginv
            cand = yt - lam @ N
            feas = np.all(cand @ P.normals.T - P.offsets <= 1e-12 * (1 + np.abs(P.offsets)), axis=1)
            good = feas & np.all(lam >= -1e-14, axis=1)
            hit = todo[good]
            res[hit] = cand[good]
            which[hit] = idx
            todo = todo[~good]
        if todo.size:
            # numerically borderline points: fall back to the exhaustive search
            res[todo] = project_brute(P, y[todo])
            which[todo] = self._classify(y[todo], res[todo])
        return res, which

    def _classify(self, y, proj):
        # largest face system contained in the active set at the nearest point
        P = self.P
        out = np.full(y.shape[0], -1, dtype=np.int64)
        s = proj @ P.normals.T - P.offsets
        for i in range(y.shape[0]):
            if np.array_equal(y[i], proj[i]):
                continue
            active = set(np.flatnonzero(np.abs(s[i]) <= 1e-9).tolist())
            best = -1
            for idx, (S, *_rest) in enumerate(self.systems):
                if set(S) <= active and (best < 0 or len(S) >= len(self.systems[best][0])):
                    best = idx
            out[i] = best
        return out

    def normal_projector(self, idx):
        """Projector onto the normal space of face system ``idx`` (zero for -1)."""
        return self.systems[idx][3]

    def normal_projectors(self):
        n = self.P.dim
        mats = [s[3] for s in self.systems] + [np.zeros((n, n))]
        return np.array(mats)  # index -1 picks the zero matrix


def project_to_polytope(P: Polytope, p, check=True):
    """Nearest point of X x {0} in R^{n+1} to ``p``.

    The last coordinate is dropped, the rest projected onto X by Dykstra's
    method, and (with ``check``) the result compared with the brute-force
    face search.  Raises NoConvergence if Dykstra stalls or disagrees.
    """
    p = np.asarray(p, dtype=float)
    n = P.dim
    if p.shape[-1] != n + 1:
        raise ValueError(f"expected points in R^{n + 1}")
    base = np.atleast_2d(p)[:, :n]
    proj = dykstra(P, base)
    if check:
        ref = project_brute(P, base)
        err = float(np.max(np.abs(proj - ref)))
        if err > 1e-9:
            raise NoConvergence(f"Dykstra and brute force disagree by {err:.3e}", residual=err)
    out = np.hstack([proj, np.zeros((proj.shape[0], 1))])
    return out[0] if p.ndim == 1 else out
