"""Sampled convexity and curvature summary of a smoothed field."""
from __future__ import annotations

import itertools

import numpy as np

from .certificates import (level_surface_curvature, strong_convexity_certificate,
                           tangent_frame)
from .refine import _ray_roots


def sample_ball(rng, center, radius, count):
    """Uniform samples from a closed ball."""
    N = len(center)
    g = rng.standard_normal((count, N))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / N)
    return center + r[:, None] * g


def surface_points(field, level, rng, count, center):
    """Level-set points hit by rays from ``center`` in random directions."""
    N = len(center)
    D = rng.standard_normal((count, N))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    O = np.tile(center, (count, 1))
    t = _ray_roots(field, level, O, D, field.sigma)
    return O + t[:, None] * D


def min_sectional_curvature(field, x):
    """Smallest K over coordinate planes of an orthonormal tangent frame at x."""
    frame = tangent_frame(field.evaluate(x).gradient)
    return min(level_surface_curvature(field, x, u, v)
               for u, v in itertools.combinations(frame, 2))


def smoothing_report(field, level, rng, n_points=200, radius=2.0, n_surface=100):
    P = field.polytope
    center = np.append(P.chebyshev_center()[0], 0.0)
    X = sample_ball(rng, center, radius, n_points)
    ev = field.evaluate(X, with_error=True)
    lam = np.linalg.eigvalsh(ev.hessian)[:, 0]
    certs = [strong_convexity_certificate(field, v, radius, center=center) for v in P.vertices]
    worst = min(certs, key=lambda c: c.log10_kappa_hat)
    Y = surface_points(field, level, rng, n_surface, center)
    K = [min_sectional_curvature(field, y) for y in Y]
    return {
        "sigma": field.sigma, "level": level, "quadrature": field.describe(),
        "ball_center": center, "ball_radius": radius, "n_points": n_points,
        "hessian_lambda_min": float(lam.min()),
        "quadrature_error": float(np.max(ev.error)),
        "kappa_hat": worst.kappa_hat, "log10_kappa_hat": worst.log10_kappa_hat,
        "rho": worst.rho, "kappa_certificate": worst.to_json(),
        "lambda_min_minus_kappa_hat": float(lam.min() - worst.kappa_hat),
        "sampled_min_K": float(min(K)), "n_surface_points": n_surface,
    }
