import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geobouquet import RankAmbiguous, Subspace, intersect, nullspace
from geobouquet.errors import DomainError
from geobouquet.subspaces import (Rotation2Plane, intersect_report, nullspace_report,
                                  rotate_halfspace_normal)

E = np.eye(3)


def test_nullspace_of_zero_matrix_is_everything():
    assert nullspace(np.zeros((3, 3))).dim == 3


def test_nullspace_of_identity_is_trivial():
    assert nullspace(np.eye(3)).dim == 0


def test_nullspace_of_rank_one_matrix(rng):
    u = rng.standard_normal(3)
    w = rng.standard_normal(3)
    u /= np.linalg.norm(u)
    w /= np.linalg.norm(w)
    A = np.outer(u, w)
    K = nullspace(A)
    assert K.dim == 2
    for b in K.basis:
        assert np.linalg.norm(A @ b) < 1e-14
        assert abs(b @ w) < 1e-14


def test_nullspace_flags_ambiguous_rank():
    # singular values 1 and 1e-8 * 0.9 / 0.6: the cut at 1e-8 falls between 6e-9 and 1.5e-8
    A = np.diag([1.0, 1.5e-8, 0.9e-8])
    with pytest.raises(RankAmbiguous) as info:
        nullspace(A)
    assert info.value.gap_ratio > 0.5


def test_nullspace_reports_clean_gap():
    rep = nullspace_report(np.diag([2.0, 1.0, 1e-15]))
    assert rep.subspace.dim == 1
    assert rep.gap_ratio < 1e-14


def test_intersection_of_identical_subspaces():
    S = Subspace.span([[1.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
    assert intersect([S, S]).equals(S)


def test_coordinate_planes_meet_in_an_axis():
    xy = Subspace.span([E[0], E[1]])
    yz = Subspace.span([E[1], E[2]])
    out = intersect([xy, yz])
    assert out.equals(Subspace.span([E[1]]))


def test_three_simplex_planes_meet_trivially():
    s = math.sqrt(3) / 2
    planes = [Subspace.span([[0, 1, 0], [0, 0, 1]]),
              Subspace.span([[-s, -0.5, 0], [0, 0, 1]]),
              Subspace.span([E[0], E[1]])]
    K, margin = intersect_report(planes)
    assert K.dim == 0
    assert margin > 0.1


def test_principal_angles_match_direct_cosines():
    # independent oracle: arccos of the singular values of A^T B
    A = Subspace.span([[1.0, 0, 0], [0, 1.0, 0]])
    t = 0.3
    B = Subspace.span([[1.0, 0, 0], [0, math.cos(t), math.sin(t)]])
    sv = np.linalg.svd(A.basis @ B.basis.T, compute_uv=False)
    oracle = np.sort(np.arccos(np.clip(sv, -1, 1)))
    assert np.allclose(np.sort(A.principal_angles(B)), oracle, atol=1e-12)
    assert A.max_angle(B) == pytest.approx(t, abs=1e-12)


def test_quarter_turn():
    plane = Subspace.span([E[0], E[1]])
    out = rotate_halfspace_normal(E[0], plane, math.pi / 2)
    assert np.allclose(out, E[1], atol=1e-15)


def test_zero_rotation_is_identity():
    plane = Subspace.span([E[0], E[1]])
    v = np.array([0.6, 0.8, 0.0])
    assert np.allclose(rotate_halfspace_normal(v, plane, 0.0), v, atol=0)


@pytest.mark.parametrize("theta", [0.1, 0.7, 2.0, -1.3])
def test_rotation_keeps_angle(theta):
    plane = Subspace.span([[0, 1.0, 0], [1.0, 0, 0]])
    x = np.array([0, 1.0, 0])
    out = rotate_halfspace_normal(x, plane, theta)
    assert out @ x == pytest.approx(math.cos(theta), abs=1e-14)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-15)
    assert abs(out[2]) < 1e-15
    assert abs(abs(out[0]) - abs(math.sin(theta))) < 1e-14


def test_rotation_rejects_normal_outside_plane():
    plane = Subspace.span([E[0], E[1]])
    with pytest.raises(DomainError):
        rotate_halfspace_normal(E[2], plane, 0.3)


def test_non_orthonormal_basis_rejected():
    with pytest.raises(DomainError):
        Subspace(2, [[1.0, 0.0], [1.0, 1.0]])


def test_json_round_trip():
    S = Subspace.span([[1.0, 2.0, 3.0]])
    T = Subspace.from_json(S.to_json())
    assert np.array_equal(S.basis, T.basis)


# -- properties ---------------------------------------------------------------

def _matrices(rows, cols):
    return arrays(np.float64, (rows, cols),
                  elements=st.floats(-3, 3, allow_nan=False, allow_infinity=False))


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 3), st.integers(0, 2**31))
def test_nullspace_vectors_are_annihilated(rows, cols, rank, seed):
    r = np.random.default_rng(seed)
    rank = min(rank, rows, cols)
    A = r.standard_normal((rows, rank)) @ r.standard_normal((rank, cols))
    try:
        rep = nullspace_report(A)
    except RankAmbiguous:
        return
    smax = rep.singular_values[0] if rep.singular_values.size else 0.0
    for b in rep.subspace.basis:
        assert np.linalg.norm(A @ b) <= 10 * 1e-8 * smax + 1e-10
    assert rep.subspace.dim >= cols - rank


def _random_subspace(r, n):
    k = int(r.integers(1, n + 1))
    return Subspace.span(r.standard_normal((k, n)))


@given(st.integers(2, 5), st.integers(0, 2**31))
def test_intersection_commutes_and_associates(n, seed):
    r = np.random.default_rng(seed)
    # share a common direction so the intersection is not always trivial
    common = r.standard_normal(n)
    A, B, C = (Subspace.span(np.vstack([common, r.standard_normal((int(r.integers(0, n - 1)), n))]))
               for _ in range(3))
    ab = intersect([A, B])
    ba = intersect([B, A])
    assert ab.dim == ba.dim and ab.equals(ba)
    left = intersect([ab, C])
    right = intersect([A, intersect([B, C])])
    assert left.dim == right.dim and left.equals(right)
    assert left.contains(common / np.linalg.norm(common), tol=1e-9)


@given(st.integers(2, 6), st.floats(-7, 7), st.integers(0, 2**31))
def test_rotations_are_proper_orthogonal(n, angle, seed):
    r = np.random.default_rng(seed)
    plane = Subspace.span(r.standard_normal((2, n)))
    R = Rotation2Plane(plane, angle).matrix()
    assert np.allclose(R.T @ R, np.eye(n), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
    for w in plane.complement().basis:
        assert np.allclose(R @ w, w, atol=1e-12)


@given(st.integers(1, 5), st.integers(0, 2**31))
def test_complement_dimensions_add_up(n, seed):
    S = _random_subspace(np.random.default_rng(seed), n)
    C = S.complement()
    assert S.dim + C.dim == n
    if C.dim and S.dim:
        assert np.max(np.abs(S.basis @ C.basis.T)) < 1e-12
    P = S.projector()
    assert np.allclose(P @ P, P, atol=1e-12)
