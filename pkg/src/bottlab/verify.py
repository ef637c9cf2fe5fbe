"""Fast invariant checks behind ``bottlab verify``; reduced sizes of the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from . import centriole, classifier, clifford, liegroup, pathflow

EXPECTED_DIMS = (1, 2, 4, 4, 8, 8, 8, 8, 16)
EXPECTED_GROUPS = ("Z2", "Z2", "Zero", "Z", "Zero", "Zero", "Zero", "Z")


def _tables():
    dims = all(clifford.irreducible_dim(k) == EXPECTED_DIMS[k] for k in range(9))
    groups = all(clifford.group_kind(k) == EXPECTED_GROUPS[k % 8] for k in range(24))
    return dims and groups, "m_k for k <= 8, A_k for k <= 23"


def _relations(kmax=17):
    worst = max(clifford.irreducible(k).relation_residual() for k in range(kmax + 1))
    for k in (3, 7, 11):
        worst = max(worst, clifford.second_irreducible(k).relation_residual())
    return worst <= 1e-10, f"max residual {worst:.1e} for k <= {kmax}"


def _restriction():
    for k in range(10):
        D = clifford.decompose(clifford.restrict(clifford.irreducible(k + 1)))
        r = k % 8
        want = (2, 0) if r in (0, 1) else (1, 1) if r in (3, 7) else (D.p, D.q)
        if (D.p, D.q) != want:
            return False, f"k = {k}: got {(D.p, D.q)}"
    return True, "k <= 9"


def _extendibility(pmax=2):
    count = 0
    for k in range(10):
        for p in range(pmax + 1):
            for q in range(pmax + 1 if k % 4 == 3 else 1):
                S = clifford.build(k, p, q)
                ok, J = clifford.is_extendible(S)
                cls = clifford.class_from_multiplicities(k, p, q)
                if ok != cls.is_zero:
                    return False, f"k = {k}, p = {p}, q = {q}"
                count += 1
    return True, f"{count} multiplicity vectors"


def _flow(seed, trials=3):
    for s in range(trials):
        res = pathflow.shorten(pathflow.random_path(8, 64, seed=seed + s))
        if np.abs(res.angles - 1).max() > 1e-4 or np.any(np.diff(res.energies) > 0):
            return False, f"seed {seed + s}: angles {res.angles}"
    geo = liegroup.GroupGeodesic(np.eye(2), liegroup.ROT)
    E = pathflow.discrete_energy(pathflow.DiscretePath(geo.sample(np.linspace(0, 1, 65))))
    ok = abs(E - 2 * np.pi ** 2) <= 1e-3
    return ok, f"{trials} paths in SO(8); SO(2) energy error {abs(E - 2 * np.pi ** 2):.1e}"


def _index():
    for k, angles in [(0, (3, 1)), (1, (5, 1, 1)), (2, (3, -1)), (3, (3, 1))]:
        geo, ctx = centriole.synthetic_geodesic(angles, k)
        split = centriole.split_modules(geo.velocity, ctx)
        for j, h in itertools.combinations(range(split.r), 2):
            b = abs(split.angles[j] - split.angles[h]) if split.case_two \
                else split.angles[j] + split.angles[h]
            if b / 2 >= 2:
                cut = centriole.cut_corner(geo, (j, h), split, ctx)
                if not cut.energy_cut < cut.energy_geodesic:
                    return False, f"k = {k}, angles {angles}"
    zero = all(centriole.index_lower_bound([1, -1, 1], k, 1 if k % 4 == 2 else None) == 0
               for k in range(4))
    return zero, "corner cuts shorten; all-one multisets have bound 0"


def _degree(seed, trials=5):
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        angles = [int(a) for a in 2 * rng.integers(-2, 2, size=2) + 1]
        geo, ctx = centriole.synthetic_geodesic(angles, 2)
        Jo = ctx.generators[0]
        loop = [ctx.base.T @ P for P in geo.sample(np.linspace(0, 1, 129))]
        w = liegroup.det_winding(loop, Jo)
        expect = 0.5 * liegroup.complex_angles(geo.velocity, Jo).sum()
        if w != round(expect):
            return False, f"angles {angles}: winding {w}, expected {expect}"
    return True, f"{trials} geodesics in P_2"


def _round_trip(T=16):
    for k, p, q in [(1, 1, 0), (1, 2, 0), (2, 1, 0), (3, 1, 0), (3, 0, 1)]:
        S = clifford.build(k, p, q)
        fam = classifier.hopf_clutching(S, pathflow.SphereGrid(k, T))
        rep = classifier.classify(fam, config=pathflow.FlowConfig(T=T, N=2 * T))
        if rep.module_class != clifford.class_in_Ak(S):
            return False, f"k = {k}, (p, q) = {(p, q)}: {rep.module_class}"
    return True, f"Hopf maps, k <= 3, T = {T}"


def run_checks(seed=0):
    checks = [
        ("tables", _tables),
        ("clifford relations", _relations),
        ("restriction law", _restriction),
        ("extendible iff class zero", _extendibility),
        ("flow correctness", lambda: _flow(seed)),
        ("index machinery", _index),
        ("degree invariant", lambda: _degree(seed)),
        ("classifier round trip", _round_trip),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
