import numpy as np
import pytest

from geobouquet.constructions import HexagonFamilyParams, build_hexagon
from geobouquet.errors import DomainError, NotRegular
from geobouquet.smoothing import (AnalyticField, SmoothField, extract_surface, is_watertight,
                                  length_neutral_level)


def test_sphere_mesh():
    mesh = extract_surface(AnalyticField.sphere(), 1.0, resolution=41)
    assert mesh.watertight
    assert mesh.euler_characteristic == 2 and mesh.genus == 0
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.max(np.abs(radii - 1.0)) < mesh.cell ** 2
    assert mesh.max_residual < mesh.residual_tol


def _pinched():
    # (x^2 - 1)^2 + y^2 + z^2 = 1 pinches at the origin, a critical point on the level
    def value(p):
        return (p[0] ** 2 - 1) ** 2 + p[1] ** 2 + p[2] ** 2

    def grad(p):
        return np.array([4 * p[0] * (p[0] ** 2 - 1), 2 * p[1], 2 * p[2]])

    def hess(p):
        return np.diag([12 * p[0] ** 2 - 4, 2.0, 2.0])

    def values(X):
        return (X[:, 0] ** 2 - 1) ** 2 + X[:, 1] ** 2 + X[:, 2] ** 2

    return AnalyticField(value, grad, hess, 3, values=values)


def test_level_through_a_critical_point_is_not_regular():
    b = 1.6
    with pytest.raises(NotRegular):
        extract_surface(_pinched(), 1.0, resolution=33, bounds=([-b, -b, -b], [b, b, b]))


def test_regular_level_of_the_same_field():
    b = 1.8
    mesh = extract_surface(_pinched(), 0.5, resolution=45, bounds=([-b, -b, -b], [b, b, b]))
    # two separate blobs around x = +-1
    assert mesh.watertight and mesh.euler_characteristic == 4


def test_grid_must_contain_the_level_set():
    with pytest.raises(DomainError):
        extract_surface(AnalyticField.sphere(), 1.0, resolution=21, bounds=([-0.5] * 3, [0.5] * 3))


def test_smoothed_hexagon_is_a_sphere():
    P, _ = build_hexagon(HexagonFamilyParams(1.3))
    sigma = 0.05
    F = SmoothField(P, sigma)
    mesh = extract_surface(F, length_neutral_level(sigma), resolution=96)
    assert mesh.watertight
    assert mesh.euler_characteristic == 2
    assert mesh.max_residual < mesh.residual_tol


def test_watertight_detects_a_hole():
    faces = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
    assert is_watertight(faces)
    assert not is_watertight(faces[:3])
