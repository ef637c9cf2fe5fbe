"""
The chain SO(n) = P_0 > P_1 > ... of iterated centrioles.

P_k is the component through J_k of the complex structures anticommuting
with a fixed chain J_1..J_{k-1}.  It is never parametrised: a context holds
the chain and the base point, and everything else is membership tests,
tangent projections and ambient geodesics t -> J_k expm(pi t A), with A
commuting with J_1..J_{k-1} and anticommuting with J_k.

A geodesic from J_k to -J_k splits R^n into minimal subspaces invariant
under A and the chain.  Two cases, after the residue of k + 1 mod 4:

* Case 1 (k + 1 != 3 mod 4).  J' = A / |A| and J_{k+1} = J_k J' extend the
  chain to a Cl_{k+1}-module; the summands are its irreducible pieces and
  A = a_j J' on V_j with a_j > 0 odd.
* Case 2 (k + 1 = 3 mod 4).  J_o = J_1...J_{k-1} is a complex structure
  commuting with A, and A = a_j J_o on V_j with signed odd a_j; the summands
  are irreducible Cl_k-modules inside the eigenspaces of -A J_o.

Any two summands are isomorphic (after flipping J' on one of them in Case
1), and the rotation B between them conjugates the geodesic into a family
that rejoins it at t = 1/b.  Cutting that corner lowers the energy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .clifford import (
    CliffordSystem, anticommutant_project, commutant_project, decompose, irreducible,
)
from .errors import InvalidInput
from .liegroup import GroupGeodesic, expm, skew_spectral, unit_part
from .pathflow import DiscretePath, discrete_energy, geodesic_midpoint

CONTEXT_TOL = 1e-10
MEMBER_TOL = 1e-8


def _complex_structure_residual(J):
    I = np.eye(J.shape[0])
    return max(np.abs(J.T @ J - I).max(), np.abs(J @ J + I).max())


@dataclass(frozen=True)
class CentrioleContext:
    """P_k through ``base`` = J_k, cut out by ``chain`` = J_1..J_{k-1}."""

    chain: CliffordSystem
    base: np.ndarray = field(repr=False)

    def __post_init__(self):
        base = np.array(self.base, dtype=float)
        if base.shape != (self.chain.n, self.chain.n):
            raise InvalidInput("base point and chain act on different spaces")
        base.setflags(write=False)
        object.__setattr__(self, "base", base)
        res = max(self.chain.relation_residual(), _complex_structure_residual(base),
                  max((np.abs(base @ J + J @ base).max() for J in self.chain.generators),
                      default=0.0))
        if res > CONTEXT_TOL:
            raise InvalidInput(f"chain and base point violate the relations (residual {res:.2e})")

    @classmethod
    def from_system(cls, S, k=None):
        """Context for P_k from a Clifford system with at least k generators."""
        k = S.k if k is None else k
        if not 1 <= k <= S.k:
            raise InvalidInput(f"need 1 <= k <= {S.k}")
        gens = S.generators
        return cls(CliffordSystem(k - 1, S.n, gens[:k - 1]), gens[k - 1])

    @property
    def k(self):
        return self.chain.k + 1

    @property
    def n(self):
        return self.chain.n

    @property
    def generators(self):
        return self.chain.generators

    def contains(self, J, tol=MEMBER_TOL):
        return in_midpoint_set(J, self, tol)

    def to_dict(self):
        return {"chain": self.chain.to_dict(), "base": self.base.tolist()}

    @classmethod
    def from_dict(cls, d):
        try:
            chain = CliffordSystem.from_dict(d["chain"])
            base = np.array(d["base"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed centriole context: {exc}") from exc
        return cls(chain, base)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def in_midpoint_set(J, ctx, tol=MEMBER_TOL):
    """Orthogonal complex structure anticommuting with the chain of ``ctx``."""
    J = np.asarray(J, dtype=float)
    if J.shape != (ctx.n, ctx.n):
        return False
    if _complex_structure_residual(J) > tol:
        return False
    return all(np.abs(J @ K + K @ J).max() <= tol for K in ctx.generators)


def tangent_project(X, ctx):
    """Projection onto {A skew : A J_i = J_i A (i < k), A J_k = -J_k A}.

    The tangent space of P_k at J_k is J_k times this subspace.
    """
    X = np.asarray(X, dtype=float)
    if np.abs(X + X.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(X).max(initial=0.0)):
        raise InvalidInput("tangent_project expects a skew matrix")
    A = anticommutant_project(commutant_project(X, ctx.generators), [ctx.base])
    return 0.5 * (A - A.T)


def random_point(ctx, seed=0, scale=1.0):
    """Q J_k Q^T with Q = expm(X), X a random skew matrix commuting with the chain."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((ctx.n, ctx.n))
    X = commutant_project(X - X.T, ctx.generators)
    X = 0.5 * (X - X.T)
    Q = expm(scale * X)
    return Q @ ctx.base @ Q.T


# -- geodesics from J_k to -J_k -------------------------------------------------

def _context_base(ctx, n):
    return np.eye(n) if ctx is None else ctx.base


def _centriole_points(geo, ctx):
    """Points of the P_k geodesic: geo itself if based at J_k, J_k geo if based at I."""
    base = _context_base(ctx, geo.base.shape[0])
    if np.abs(geo.base - base).max() <= MEMBER_TOL:
        return lambda ts: geo.sample(ts)
    if np.abs(geo.base - np.eye(base.shape[0])).max() <= MEMBER_TOL:
        return lambda ts: np.array([base @ P for P in geo.sample(ts)])
    raise InvalidInput("geodesic does not start at the base point J_k (or at I)")


def minimality_test(geo, ctx=None, samples=8):
    """Is a geodesic from J_k to -J_k inside P_k minimal?

    ``ctx`` None means the group level: a geodesic from I to -I in SO(n).
    Returns (minimal, angles) with the rotation angles of the velocity.
    """
    points = _centriole_points(geo, ctx)
    n = geo.base.shape[0]
    base = _context_base(ctx, n)
    start, end = points([0.0, 1.0])
    if np.abs(start - base).max() > MEMBER_TOL or np.abs(end + base).max() > 1e-6:
        raise InvalidInput("geodesic endpoints are not (J_k, -J_k)")
    if ctx is not None:
        for P in points(np.arange(1, samples + 1) / (samples + 1)):
            if not in_midpoint_set(P, ctx, 1e-6):
                raise InvalidInput("geodesic leaves the centriole")
    sp = skew_spectral(geo.velocity)
    minimal = sp.kernel_dim == 0 and bool(np.all(np.abs(sp.angles - 1.0) <= 1e-6))
    return minimal, sp.angles


def is_case_two(k):
    return (k + 1) % 4 == 3


def _check_odd(angles):
    out = []
    for a in angles:
        if float(a) != int(a) or int(a) % 2 == 0:
            raise InvalidInput(f"angle {a} is not an odd integer")
        out.append(int(a))
    return out


def index_lower_bound(angles, k, c=None):
    """Number of summand pairs admitting an energy-decreasing corner cut.

    Case 1 counts pairs with (|a_j| + |a_h|) / 2 >= 2; Case 2 counts pairs
    of signed angles with |a_j - a_h| / 2 >= 2, and ``c`` (if given) must be
    the fixed degree sum(a_j).
    """
    a = _check_odd(angles)
    if is_case_two(k):
        if c is not None and sum(a) != c:
            raise InvalidInput(f"angles sum to {sum(a)}, not to the fixed degree {c}")
        return sum(1 for i in range(len(a)) for j in range(i + 1, len(a))
                   if abs(a[i] - a[j]) >= 4)
    return sum(1 for i in range(len(a)) for j in range(i + 1, len(a))
               if abs(a[i]) + abs(a[j]) >= 4)


# -- module splitting along a geodesic ---------------------------------------------

@dataclass(frozen=True)
class ModuleSplitting:
    """Summands V_j of a geodesic velocity with their angles and module generators.

    ``generators`` are the n x n matrices the summands are modules over:
    J_1..J_k, J_{k+1} in Case 1 and J_1..J_k in Case 2 (at k = 0 just J').
    ``structure`` is J' (Case 1) or J_o (Case 2), so A = a_j * structure on V_j.
    """

    k: int
    case_two: bool
    bases: tuple = field(repr=False)
    angles: tuple = ()
    generators: tuple = field(default=(), repr=False)
    structure: np.ndarray = field(default=None, repr=False)

    @property
    def r(self):
        return len(self.bases)


def _eigen_groups(w, V, tol=1e-6):
    groups, start = [], 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > tol:
            groups.append((float(np.mean(w[start:i])), V[:, start:i]))
            start = i
    return groups


def split_modules(A, ctx=None, seed=0, tol=1e-8):
    """Minimal subspaces invariant under A and J_1..J_k, with their angles."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    k = 0 if ctx is None else ctx.k
    chain = () if ctx is None else tuple(ctx.generators)
    base = None if ctx is None else ctx.base
    if is_case_two(k):
        Jo = reduce(np.matmul, chain)
        w, V = np.linalg.eigh(-0.5 * (A @ Jo + (A @ Jo).T))
        gens = chain + (base,)
        structure = Jo
    else:
        structure = unit_part(A, tol=1e-6)
        w, V = np.linalg.eigh(-A @ A)
        w = np.sqrt(np.clip(w, 0.0, None))
        gens = (structure,) if ctx is None else chain + (base, base @ structure)
    bases, angles = [], []
    for a, W in _eigen_groups(w, V):
        if abs(a) < 1e-6:
            if ctx is not None:
                raise InvalidInput("velocity has a kernel: not a geodesic from J_k to -J_k")
            raise InvalidInput("velocity has a kernel: not a geodesic from I to -I")
        sub = CliffordSystem(len(gens), W.shape[1], tuple(W.T @ G @ W for G in gens))
        D = decompose(sub, tol=tol, seed=seed)
        for U in D.bases:
            bases.append(W @ U)
            angles.append(a)
    return ModuleSplitting(k, is_case_two(k), tuple(bases), tuple(angles), gens, structure)


def _intertwiner(Gj, Gh, seed=0, tries=5):
    """Orthogonal Phi with Gh_i Phi = Phi Gj_i for every generator pair."""
    rng = np.random.default_rng(seed)
    m = Gj[0].shape[0]
    for _ in range(tries):
        Phi = rng.standard_normal((m, m))
        for _ in range(3):
            for X, Y in zip(Gj, Gh):
                Phi = 0.5 * (Phi - Y @ Phi @ X)
        U, s, Vt = np.linalg.svd(Phi)
        if s.min() > 1e-6 * s.max():
            Phi = U @ Vt
            res = max(np.abs(Y @ Phi - Phi @ X).max() for X, Y in zip(Gj, Gh))
            if res < 1e-8:
                return Phi
    raise InvalidInput("the two summands are not isomorphic modules")


@dataclass
class CornerCut:
    energy_geodesic: float
    energy_cut: float
    energy_broken: float
    corner_time: float
    b: int
    path: DiscretePath = field(repr=False)
    rotation: np.ndarray = field(repr=False)

    @property
    def decrease(self):
        return self.energy_geodesic - self.energy_cut


def _corner_b(splitting, j, h):
    aj, ah = splitting.angles[j], splitting.angles[h]
    if splitting.case_two:
        return (aj - ah) / 2
    return (aj + ah) / 2


def cut_corner(geo, pair, modules=None, ctx=None, u=np.pi / 4, N=None, seed=0):
    """Witness that a geodesic is not locally shortest past t = 1/b.

    Builds the rotation B between summands V_j and V_h, the broken path that
    follows e^{uB} gamma e^{-uB} up to t = 1/b and gamma afterwards, and cuts
    its corner by a geodesic midpoint.  Returns a CornerCut with the discrete
    energies of the geodesic, the broken path and the cut path.
    """
    n = geo.base.shape[0]
    points = _centriole_points(geo, ctx)
    modules = split_modules(geo.velocity, ctx, seed=seed) if modules is None else modules
    j, h = pair
    if j == h or not (0 <= j < modules.r and 0 <= h < modules.r):
        raise InvalidInput(f"invalid summand pair {pair}")
    b = _corner_b(modules, j, h)
    if abs(b) < 2 or abs(b - round(b)) > 1e-6:
        raise InvalidInput(f"b = {b:g}: no corner inside (0, 1) for this pair")
    b = int(round(abs(b)))
    Bj, Bh = modules.bases[j], modules.bases[h]
    Gj = [Bj.T @ G @ Bj for G in modules.generators]
    Gh = [Bh.T @ G @ Bh for G in modules.generators]
    if not modules.case_two:
        Gh[-1] = -Gh[-1]
    Phi = _intertwiner(Gj, Gh, seed)
    B = Bh @ Phi @ Bj.T - Bj @ Phi.T @ Bh.T
    R = np.eye(n) + np.sin(u) * B + (1 - np.cos(u)) * (B @ B)

    if N is None:
        N = b * math.ceil(64 / b)
    if N % b:
        raise InvalidInput("N must be a multiple of b so the corner is a vertex")
    ts = np.linspace(0.0, 1.0, N + 1)
    pts = points(ts)
    geodesic = DiscretePath(pts)
    corner = N // b
    broken = np.array(pts)
    for i in range(1, corner):
        broken[i] = R @ pts[i] @ R.T
    cut = np.array(broken)
    cut[corner] = geodesic_midpoint(broken[corner - 1], broken[corner + 1])
    return CornerCut(discrete_energy(geodesic), discrete_energy(DiscretePath(cut)),
                     discrete_energy(DiscretePath(broken)), 1.0 / b, b,
                     DiscretePath(cut), R)


# -- synthetic geodesics ------------------------------------------------------------

def synthetic_geodesic(angles, k=0):
    """A geodesic from J_k to -J_k with prescribed angles on irreducible summands.

    The space is R^n = S_{k+1}^r with generators E_1..E_{k+1}; the chain is
    E_1..E_{k-1} and J_k = E_k.  In Case 1 the velocity is a_j J' with
    J' = -E_k E_{k+1}; in Case 2 it is a_j J_o with J_o = E_1...E_{k-1}.
    Returns (geodesic based at J_k, context or None at k = 0).
    """
    a = _check_odd(angles)
    r = len(a)
    E = irreducible(k + 1)
    m = E.n
    gens = [np.kron(np.eye(r), G) for G in E.generators]
    n = r * m
    D = np.kron(np.diag(np.asarray(a, dtype=float)), np.eye(m))
    if k == 0:
        return GroupGeodesic(np.eye(n), gens[0] @ D), None
    ctx = CentrioleContext(CliffordSystem(k - 1, n, tuple(gens[:k - 1])), gens[k - 1])
    if is_case_two(k):
        K = reduce(np.matmul, gens[:k - 1])
    else:
        K = -gens[k - 1] @ gens[k]
    A = K @ D
    return GroupGeodesic(ctx.base, 0.5 * (A - A.T)), ctx
