import json
import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from bottlab.classifier import hopf_clutching
from bottlab.clifford import build, irreducible
from bottlab.errors import InvalidInput, NonConvergence
from bottlab.liegroup import ROT, GroupGeodesic, det_winding, distance
from bottlab.pathflow import (
    DiscretePath, FlowConfig, MapFamily, SphereGrid, birkhoff_sweep, discrete_energy,
    flow_family, geodesic_defect, normalize_poles, path_length, random_path, shorten,
)


def polygon(geo, N):
    return DiscretePath(geo.sample(np.linspace(0.0, 1.0, N + 1)))


def block_rotation(angles, t):
    return sla.block_diag(*[sla.expm(np.pi * a * t * ROT) for a in angles])


def test_constant_path_has_zero_energy():
    assert discrete_energy(DiscretePath([np.eye(3)] * 5)) == 0.0


def test_so2_minimal_geodesic_energy():
    E = discrete_energy(polygon(GroupGeodesic(np.eye(2), ROT), 64))
    assert abs(E - 2 * np.pi ** 2) <= 1e-3


def test_energy_dominates_squared_length():
    for seed in range(50):
        p = random_path(4, 16, seed=seed, amplitude=2.0)
        assert discrete_energy(p) >= path_length(p) ** 2 - 1e-9


def test_path_needs_two_segments():
    with pytest.raises(InvalidInput):
        DiscretePath([np.eye(2), -np.eye(2)])


def test_sweep_fixes_geodesic_polygons():
    geo = GroupGeodesic(np.eye(4), np.kron(np.diag([1.0, 3.0]), ROT))
    p = polygon(geo, 32)
    q = birkhoff_sweep(p)
    assert np.abs(q.points - p.points).max() <= 1e-12


def test_sweep_decreases_energy_of_random_path():
    p = random_path(4, 32, seed=3)
    q = birkhoff_sweep(p)
    assert discrete_energy(q) < discrete_energy(p)
    assert np.array_equal(q.start, p.start) and np.array_equal(q.end, p.end)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([2, 4, 6]), st.sampled_from([8, 16, 32]))
def test_energy_never_increases(seed, n, N):
    p = random_path(n, N, seed=seed, amplitude=1.5)
    E = discrete_energy(p)
    for _ in range(5):
        p = birkhoff_sweep(p)
        E_new = discrete_energy(p)
        assert E_new <= E
        E = E_new


def test_zigzag_converges_monotonically():
    geo = GroupGeodesic(np.eye(3), np.array([[0, -1.0, 0], [1.0, 0, 0], [0, 0, 0]]) * 0.8)
    pts = polygon(geo, 32).points.copy()
    X = np.zeros((3, 3))
    X[0, 2], X[2, 0] = -0.3, 0.3
    for i in range(1, 32):
        pts[i] = pts[i] @ sla.expm((-1) ** i * X)
    res = shorten(DiscretePath(pts), tol=1e-13, max_sweeps=20000)
    assert np.all(np.diff(res.energies) <= 0)
    assert abs(res.energy - geo.energy()) <= 1e-6


def test_shorten_leaves_geodesics_alone():
    geo = GroupGeodesic(np.eye(4), np.kron(np.eye(2), ROT))
    res = shorten(polygon(geo, 64))
    assert res.sweeps == 0
    assert np.allclose(res.angles, [1, 1])


def test_shorten_random_paths_in_so8():
    for seed in range(5):
        p = random_path(8, 64, seed=seed)
        res = shorten(p)
        assert np.abs(res.angles - 1).max() <= 1e-4
        assert np.all(np.diff(res.energies) <= 0)
        assert np.array_equal(res.path.start, p.start) and np.array_equal(res.path.end, p.end)


def test_shorten_keeps_block_subgroup_saddle():
    # a perturbed (3, 1) path inside SO(2) x SO(2): the flow stays in the
    # subgroup, so the extra turn cannot be undone
    N = 64
    pts = []
    for i in range(N + 1):
        t = i / N
        wobble = 0.3 * np.sin(np.pi * t)
        pts.append(block_rotation([3 + wobble, 1 - wobble], t))
    res = shorten(DiscretePath(np.array(pts)), max_sweeps=20000)
    assert np.allclose(sorted(res.angles), [1, 3], atol=1e-4)


def test_shorten_reports_non_convergence():
    p = random_path(4, 64, seed=1, amplitude=2.0)
    with pytest.raises(NonConvergence) as info:
        shorten(p, tol=1e-15, max_sweeps=2)
    assert info.value.report is not None


def test_shorten_is_deterministic():
    p = random_path(6, 32, seed=11)
    a, b = shorten(p), shorten(p)
    assert np.array_equal(a.path.points, b.path.points)


def test_refining_a_geodesic_changes_energy_by_at_most_order_two():
    geo = GroupGeodesic(np.eye(4), np.kron(np.diag([1.0, 3.0]), ROT))
    for N in (16, 32, 64):
        E1, E2 = discrete_energy(polygon(geo, N)), discrete_energy(polygon(geo, 2 * N))
        assert abs(E1 - E2) <= 10.0 / N ** 2


def test_discretization_error_is_second_order():
    # a non-uniformly parametrised half turn: E_N -> 2 pi^2 int s'^2 at rate N^-2
    def speed_path(N):
        ts = np.linspace(0, 1, N + 1)
        s = ts + 0.2 * np.sin(2 * np.pi * ts) / (2 * np.pi) * 2
        return DiscretePath(np.array([sla.expm(np.pi * si * ROT) for si in s]))

    exact = 2 * np.pi ** 2 * (1 + 0.5 * 0.4 ** 2)
    errs = [abs(discrete_energy(speed_path(N)) - exact) for N in (32, 64, 128)]
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


# -- grids and families ----------------------------------------------------------

@pytest.mark.parametrize("k,T", [(0, 4), (1, 8), (2, 6), (3, 4)])
def test_sphere_grid_structure(k, T):
    g = SphereGrid(k, T)
    assert np.allclose(np.linalg.norm(g.nodes, axis=1), 1.0)
    if k:
        assert len(g) == 2 + g.num_meridians * (T - 1)
        for j in range(g.num_meridians):
            m = g.meridian(j)
            assert m[0] == 0 and m[-1] == 1 and len(m) == T + 1
            assert np.allclose(g.nodes[m[T // 2]][:-1], g.equator.nodes[j])


def test_map_family_json_round_trip():
    fam = hopf_clutching(irreducible(2), SphereGrid(2, 4))
    back = MapFamily.from_json(fam.to_json())
    assert np.array_equal(back.values, fam.values)
    d = json.loads(fam.to_json())
    assert set(d) == {"k", "T", "nodes"} and set(d["nodes"][0]) == {"coords", "value"}


def test_map_family_rejects_non_orthogonal_values():
    d = hopf_clutching(irreducible(1), SphereGrid(1, 4)).to_dict()
    d["nodes"][3]["value"][0][0] += 0.1
    with pytest.raises(InvalidInput):
        MapFamily.from_dict(d)


def loop_of(fam):
    g = fam.grid
    idx = g.meridian(0) + g.meridian(1)[::-1][1:]
    return fam.values[idx]


def u2_family(T=32):
    """A degree-one loop in U(2) inside SO(4), with displaced poles."""
    g = SphereGrid(1, T)
    vals = []
    for x, y in g.nodes:
        th = math.atan2(x, y)
        vals.append(sla.block_diag(sla.expm((th + 0.3 * np.sin(th) + 0.4) * ROT),
                                   sla.expm((0.5 * np.sin(2 * th) - 0.7) * ROT)))
    return MapFamily(g, np.array(vals))


def test_normalize_leaves_hopf_families_alone():
    fam = hopf_clutching(build(2, 1), SphereGrid(2, 8))
    out = normalize_poles(fam)
    assert np.abs(out.values - fam.values).max() < 1e-12


def test_normalize_is_gauge_invariant():
    fam = u2_family()
    Q = sla.expm(np.triu(np.ones((4, 4)), 1) - np.tril(np.ones((4, 4)), -1))
    a = normalize_poles(fam)
    b = normalize_poles(fam.map_values(lambda V: V @ Q))
    assert np.abs(a.values - b.values).max() < 1e-10
    assert np.allclose(a.values[0], np.eye(4)) and np.allclose(a.values[1], -np.eye(4))


def test_normalize_preserves_degree():
    fam = u2_family()
    Jo = np.kron(np.eye(2), ROT)
    before = det_winding(loop_of(fam), Jo)
    out = normalize_poles(fam)
    assert before == det_winding(loop_of(out), Jo) == 1


def test_normalize_rejects_odd_dimension():
    fam = MapFamily(SphereGrid(1, 4), np.array([np.eye(3)] * len(SphereGrid(1, 4))))
    with pytest.raises(InvalidInput):
        normalize_poles(fam)


def test_flow_hopf_circle_gives_plus_minus_j():
    S = irreducible(1)
    fam = hopf_clutching(S, SphereGrid(1, 16))
    mids, _ = flow_family(fam, config=FlowConfig(T=16, N=32))
    assert np.allclose(mids.values[0], S[0]) and np.allclose(mids.values[1], -S[0])


def test_flow_hopf_sphere_lands_in_complex_structures():
    fam = hopf_clutching(irreducible(2), SphereGrid(2, 8))
    mids, report = flow_family(fam, config=FlowConfig(T=8, N=16))
    assert mids.grid == SphereGrid(1, 8)
    for M in mids.values:
        assert np.abs(M @ M + np.eye(4)).max() <= 1e-6
    assert not report.failures


def test_flow_rejects_unnormalised_families():
    g = SphereGrid(1, 4)
    with pytest.raises(InvalidInput):
        flow_family(MapFamily(g, np.array([np.eye(2)] * len(g))), config=FlowConfig(T=4, N=8))


def test_flow_is_independent_of_scheduling():
    fam = normalize_poles(u2_family(8))
    a, _ = flow_family(fam, config=FlowConfig(T=8, N=16))
    b, _ = flow_family(fam, config=FlowConfig(T=8, N=16, workers=2))
    assert np.array_equal(a.values, b.values)


def test_perturbed_family_flows_to_complex_structures():
    rng = np.random.default_rng(0)
    fam = hopf_clutching(build(2, 1), SphereGrid(2, 8))
    noisy = []
    for V in fam.values:
        X = rng.standard_normal((4, 4))
        noisy.append(V @ sla.expm(0.05 * (X - X.T)))
    fam = normalize_poles(MapFamily(fam.grid, np.array(noisy)))
    mids, _ = flow_family(fam, config=FlowConfig(T=8, N=32))
    for M in mids.values:
        assert np.abs(M @ M + np.eye(4)).max() <= 1e-6


def test_geodesic_defect_of_geodesic_is_zero():
    geo = GroupGeodesic(np.eye(3), np.array([[0, -1.0, 0], [1.0, 0, 0], [0, 0, 0]]))
    assert geodesic_defect(polygon(geo, 16).points) < 1e-12
    assert distance(np.eye(3), np.eye(3)) < 1e-7
