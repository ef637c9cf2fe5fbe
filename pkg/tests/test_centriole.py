import itertools

import numpy as np
import pytest
from scipy.linalg import null_space

from bottlab.centriole import (
    CentrioleContext, cut_corner, in_midpoint_set, index_lower_bound, is_case_two,
    minimality_test, random_point, split_modules, synthetic_geodesic, tangent_project,
)
from bottlab.clifford import build
from bottlab.errors import InvalidInput
from bottlab.liegroup import GroupGeodesic, ROT
from bottlab.pathflow import discrete_energy


def context(k, p, q=0):
    """P_k inside a Cl_k module of type (p, q)."""
    return CentrioleContext.from_system(build(k, p, q))


def skew_basis(n):
    out = []
    for i, j in itertools.combinations(range(n), 2):
        E = np.zeros((n, n))
        E[i, j], E[j, i] = -1.0, 1.0
        out.append(E)
    return out


def nullspace_dim(ctx):
    # independent oracle: solve the linear constraints on skew coordinates
    basis = skew_basis(ctx.n)
    rows = []
    for J in ctx.generators:
        rows.append(np.array([(E @ J - J @ E).ravel() for E in basis]).T)
    rows.append(np.array([(E @ ctx.base + ctx.base @ E).ravel() for E in basis]).T)
    return null_space(np.vstack(rows), rcond=1e-10).shape[1]


def projector_rank(ctx):
    images = np.array([tangent_project(E, ctx).ravel() for E in skew_basis(ctx.n)])
    return np.linalg.matrix_rank(images, tol=1e-8)


def test_context_validation():
    ctx = context(2, 2)
    assert ctx.k == 2 and ctx.n == 8
    with pytest.raises(InvalidInput):
        CentrioleContext(ctx.chain, np.eye(8))


def test_membership_examples():
    ctx = context(2, 1)
    assert in_midpoint_set(ctx.base, ctx)
    assert in_midpoint_set(-ctx.base, ctx)
    assert not in_midpoint_set(np.eye(ctx.n), ctx)
    assert not in_midpoint_set(ctx.generators[0], ctx)


def test_context_json_round_trip():
    ctx = context(3, 1, 1)
    back = CentrioleContext.from_json(ctx.to_json())
    assert np.array_equal(back.base, ctx.base)
    assert back.chain.k == ctx.chain.k


@pytest.mark.parametrize("k,p,q", [(1, 2, 0), (2, 2, 0), (3, 1, 1), (3, 2, 0), (4, 1, 0)])
def test_tangent_projector_is_an_orthogonal_projection(k, p, q):
    ctx = context(k, p, q)
    rng = np.random.default_rng(k)
    X = rng.standard_normal((ctx.n, ctx.n))
    X, Y = X - X.T, (lambda Z: Z - Z.T)(rng.standard_normal((ctx.n, ctx.n)))
    A = tangent_project(X, ctx)
    assert np.abs(tangent_project(A, ctx) - A).max() <= 1e-10
    assert np.isclose(np.sum(A * Y), np.sum(X * tangent_project(Y, ctx)))
    for J in ctx.generators:
        assert np.abs(A @ J - J @ A).max() <= 1e-10
    assert np.abs(A @ ctx.base + ctx.base @ A).max() <= 1e-10


def test_projector_kills_what_commutes_with_the_base():
    ctx = context(1, 2)
    assert np.abs(tangent_project(ctx.base, ctx)).max() < 1e-14


@pytest.mark.parametrize("m", [2, 3, 4])
def test_rank_complex_structures(m):
    # P_1 = SO(2m)/U(m), dimension m^2 - m
    ctx = context(1, m)
    assert projector_rank(ctx) == nullspace_dim(ctx) == m * m - m


@pytest.mark.parametrize("p", [1, 2, 4])
def test_rank_second_centriole(p):
    # P_2 = U(m)/Sp(m/2) with n = 2m = 4p
    ctx = context(2, p)
    m = ctx.n // 2
    assert projector_rank(ctx) == nullspace_dim(ctx) == m * m - m * (m + 1) // 2


@pytest.mark.parametrize("p,q", [(1, 1), (2, 0), (2, 2), (3, 1)])
def test_rank_third_centriole(p, q):
    # P_3 is a quaternionic Grassmannian of dimension 4pq
    ctx = context(3, p, q)
    assert projector_rank(ctx) == nullspace_dim(ctx) == 4 * p * q


def test_random_point_is_in_the_centriole():
    ctx = context(3, 1, 1)
    draws = [random_point(ctx, seed) for seed in range(100)]
    for J in draws:
        assert in_midpoint_set(J, ctx, 1e-9)
    assert np.array_equal(random_point(ctx, 5), random_point(ctx, 5))
    flat = {tuple(np.round(J, 8).ravel()) for J in draws}
    assert len(flat) == 100


def test_minimality_examples():
    assert minimality_test(*synthetic_geodesic([1, 1, 1], 1))[0]
    assert not minimality_test(*synthetic_geodesic([3, 1], 1))[0]
    assert minimality_test(*synthetic_geodesic([1, -1], 2))[0]
    ok, angles = minimality_test(GroupGeodesic(np.eye(2), ROT))
    assert ok and np.allclose(angles, [1])


def test_minimality_checks_endpoints():
    geo, ctx = synthetic_geodesic([1, 1], 1)
    with pytest.raises(InvalidInput):
        minimality_test(GroupGeodesic(ctx.base, 0.5 * geo.velocity), ctx)


def test_geodesics_stay_in_the_centriole():
    for k in range(1, 7):
        signs = [3, -1, 1] if is_case_two(k) else [3, 1, 1]
        geo, ctx = synthetic_geodesic(signs, k)
        A = geo.velocity
        for J in ctx.generators:
            assert np.abs(A @ J - J @ A).max() <= 1e-8
        assert np.abs(A @ ctx.base + ctx.base @ A).max() <= 1e-8
        for P in geo.sample(np.linspace(0, 1, 9)):
            assert in_midpoint_set(P, ctx)


def test_index_bound_examples():
    assert index_lower_bound([1, 1, 1, 1], 0) == 0
    r = 6
    assert index_lower_bound([3] + [1] * (r - 1), 0) >= r - 1
    assert index_lower_bound([3, -1], 2, c=2) >= 1
    with pytest.raises(InvalidInput):
        index_lower_bound([2, 1], 0)
    with pytest.raises(InvalidInput):
        index_lower_bound([3, -1], 2, c=0)


def test_index_bound_zero_exactly_on_unit_angles():
    # pairs need r >= 2; a single summand has bound r - 1 = 0 whatever its angle
    odd = [-5, -3, -1, 1, 3, 5]
    for k in (0, 1, 3, 4):
        for r in (2, 3, 4):
            for a in itertools.product([1, 3, 5], repeat=r):
                assert (index_lower_bound(a, k) == 0) == all(x == 1 for x in a)
    # Case 2: fixed degree with |c| <= r
    for r in (2, 3, 4):
        for a in itertools.product(odd, repeat=r):
            c = sum(a)
            if abs(c) <= r:
                assert (index_lower_bound(a, 2, c) == 0) == all(abs(x) == 1 for x in a)


def test_split_modules_recovers_angles():
    for k, angles in [(0, [3, 1]), (1, [5, 1, 1]), (2, [3, -1, 1]), (3, [1, 3])]:
        geo, ctx = synthetic_geodesic(angles, k)
        split = split_modules(geo.velocity, ctx)
        assert sorted(split.angles) == sorted(angles)
        for B, a in zip(split.bases, split.angles):
            assert np.allclose(geo.velocity @ B, a * split.structure @ B, atol=1e-9)


@pytest.mark.parametrize("k,angles", [
    (0, [3, 1]), (0, [5, 1]), (0, [3, 3, 1]), (1, [3, 1]), (1, [5, 1, 1]),
    (2, [3, -1]), (2, [1, -3, 1]), (3, [3, 1]), (4, [5, 1]), (5, [3, 1]),
    (6, [3, -1]),
])
def test_cut_corner_shortens(k, angles):
    geo, ctx = synthetic_geodesic(angles, k)
    assert geo.base.shape[0] <= 48
    split = split_modules(geo.velocity, ctx)
    tried = 0
    for j, h in itertools.combinations(range(split.r), 2):
        try:
            cut = cut_corner(geo, (j, h), split, ctx)
        except InvalidInput:
            continue
        tried += 1
        assert cut.energy_cut < cut.energy_geodesic
        assert np.isclose(cut.energy_broken, cut.energy_geodesic)
        assert np.isclose(discrete_energy(cut.path), cut.energy_cut)
        if ctx is not None:
            for P in cut.path.points:
                assert in_midpoint_set(P, ctx, 1e-8)
        B = cut.rotation
        for J in (ctx.generators + (ctx.base,) if ctx else ()):
            assert np.abs(B @ J - J @ B).max() < 1e-9
    assert tried >= 1


def test_cut_corner_examples():
    geo, ctx = synthetic_geodesic([3, 1], 1)
    c31 = cut_corner(geo, (0, 1), None, ctx)
    assert c31.corner_time == 0.5
    geo5, ctx5 = synthetic_geodesic([5, 1], 1)
    c51 = cut_corner(geo5, (0, 1), None, ctx5)
    assert np.isclose(c51.corner_time, 1 / 3)
    assert c51.decrease > c31.decrease
    geo1, ctx1 = synthetic_geodesic([1, 1], 1)
    with pytest.raises(InvalidInput):
        cut_corner(geo1, (0, 1), None, ctx1)


def test_cut_corner_in_small_groups():
    # n <= 16 in SO(n) with mixed summands
    for angles in ([3, 1], [3, 1, 1, 1], [5, 3, 1], [7, 1, 1, 1, 1, 1, 1, 1]):
        geo, _ = synthetic_geodesic(angles, 0)
        assert geo.base.shape[0] <= 16
        cut = cut_corner(geo, (0, len(angles) - 1))
        assert cut.energy_cut < cut.energy_geodesic
