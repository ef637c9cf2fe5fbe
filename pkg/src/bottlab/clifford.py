"""
Real Clifford systems: k anticommuting orthogonal complex structures on R^n.

Explicit generators come from the normed division algebras.  Quaternions and
octonions are built by Cayley-Dickson doubling of the reals with

    (a, b)(c, d) = (ac - conj(d) b, da + b conj(c)),

so ``e1 e2 = e3`` in the quaternions.  Irreducible modules:

    k = 1       left multiplication by i on C
    k = 2, 3    left multiplication by e1, e2(, e3) on H
    k = 4..7    left multiplication by e1..ek on O
    k = 8       v -> [(x, y) -> (v y, -conj(v) x)] on O^2, v = e0..e7
    k > 8       J_i (x) w for i <= k - 8, then I (x) E_j, where E_j generate
                S_8 and w = E_1...E_8 (w^2 = I, w anticommutes with E_j)

For k = 3 mod 4 there are two irreducible modules.  ``irreducible(k)`` is by
definition S_k and ``second_irreducible(k)`` (right multiplication) is S'_k.
The volume element J_1...J_k is central with square I and acts on S_k by the
scalar ``volume_sign(k)`` (it is -1 for the left-multiplication models) and
by its negative on S'_k.  Classes in Z are reported as p - q with p counting
S_k summands.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache, reduce

import numpy as np

from .errors import InvalidInput
from .liegroup import ROT, skew_spectral

CONSTRUCTION_TOL = 1e-10
DECOMPOSE_TOL = 1e-8

# dimensions of S_0..S_8
_BASE_DIMS = (1, 2, 4, 4, 8, 8, 8, 8, 16)


# -- Cayley-Dickson algebra -------------------------------------------------

def cd_conj(x):
    y = -np.asarray(x, dtype=float)
    y[0] = -y[0]
    return y


def cd_mul(x, y):
    """Cayley-Dickson product of two vectors of length 2^m."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) == 1:
        return x * y
    h = len(x) // 2
    a, b, c, d = x[:h], x[h:], y[:h], y[h:]
    return np.concatenate([cd_mul(a, c) - cd_mul(cd_conj(d), b),
                           cd_mul(d, a) + cd_mul(b, cd_conj(c))])


@lru_cache(maxsize=None)
def _mult_table(dim):
    """table[i, j] = e_i * e_j as a coefficient vector."""
    E = np.eye(dim)
    return np.array([[cd_mul(E[i], E[j]) for j in range(dim)] for i in range(dim)])


def left_mult(v):
    """Matrix of x -> v x."""
    v = np.asarray(v, dtype=float)
    return np.einsum("i,ijk->kj", v, _mult_table(len(v)))


def right_mult(v):
    """Matrix of x -> x v."""
    v = np.asarray(v, dtype=float)
    return np.einsum("j,ijk->ki", v, _mult_table(len(v)))


# -- systems ------------------------------------------------------------------

def irreducible_dim(k):
    """m_k = dim S_k, with m_{k+8} = 16 m_k."""
    if k < 0:
        raise InvalidInput("k must be non-negative")
    q, r = divmod(k, 8)
    if r == 0 and q > 0:
        return 16 ** q
    return _BASE_DIMS[r] * 16 ** q


def _frozen(M):
    M = np.array(M, dtype=float)
    M.setflags(write=False)
    return M


@dataclass(frozen=True)
class CliffordSystem:
    """Generators J_1..J_k acting on R^n.

    Construction only checks shapes; ``relation_residual`` measures how far
    the Clifford relations are from holding.
    """

    k: int
    n: int
    generators: tuple = field(repr=False)

    def __post_init__(self):
        gens = tuple(_frozen(J) for J in self.generators)
        if len(gens) != self.k:
            raise InvalidInput(f"expected {self.k} generators, got {len(gens)}")
        for J in gens:
            if J.shape != (self.n, self.n):
                raise InvalidInput(f"generator of shape {J.shape}, expected {(self.n, self.n)}")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def from_generators(cls, generators, n=None):
        generators = [np.asarray(J, dtype=float) for J in generators]
        if n is None:
            if not generators:
                raise InvalidInput("n is required when there are no generators")
            n = generators[0].shape[0]
        return cls(len(generators), n, tuple(generators))

    def __getitem__(self, i):
        return self.generators[i]

    def relation_residual(self):
        """Max-norm violation of J^T J = I, J^2 = -I, J_i J_j + J_j J_i = 0."""
        if self.n == 0:
            return 0.0
        I = np.eye(self.n)
        res = 0.0
        for i, J in enumerate(self.generators):
            res = max(res, np.abs(J.T @ J - I).max(), np.abs(J @ J + I).max())
            for K in self.generators[i + 1:]:
                res = max(res, np.abs(J @ K + K @ J).max())
        return float(res)

    def check(self, tol=CONSTRUCTION_TOL):
        res = self.relation_residual()
        if res > tol:
            raise InvalidInput(f"Clifford relations violated (residual {res:.2e} > {tol:.0e})")
        return self

    def restricted_to(self, U):
        """The system compressed to the column span of an orthonormal U."""
        return CliffordSystem(self.k, U.shape[1], tuple(U.T @ J @ U for J in self.generators))

    def extended(self, J):
        return CliffordSystem(self.k + 1, self.n, self.generators + (J,))

    # -- serialisation
    def to_dict(self):
        return {"k": self.k, "n": self.n,
                "generators": [J.tolist() for J in self.generators]}

    @classmethod
    def from_dict(cls, d):
        try:
            k, n = int(d["k"]), int(d["n"])
            gens = tuple(np.array(J, dtype=float).reshape(n, n) for J in d["generators"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed Clifford system: {exc}") from exc
        return cls(k, n, gens)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def trivial_system(k, n=0):
    """A k-generator system on R^0 (the identity for direct sums)."""
    if n:
        raise InvalidInput("Clifford systems with k >= 1 need generators; only R^0 is generator-free")
    return CliffordSystem(k, 0, tuple(np.zeros((0, 0)) for _ in range(k)))


def _tensor_with_s8(S):
    E = irreducible(8).generators
    w = reduce(np.matmul, E)
    gens = [np.kron(J, w) for J in S.generators]
    gens += [np.kron(np.eye(S.n), Ej) for Ej in E]
    return CliffordSystem(S.k + 8, 16 * S.n, tuple(gens))


@lru_cache(maxsize=None)
def irreducible(k):
    """The irreducible module S_k (see module docstring for the models)."""
    if k < 0:
        raise InvalidInput("k must be non-negative")
    if k == 0:
        return CliffordSystem(0, 1, ())
    if k == 1:
        return CliffordSystem(1, 2, (ROT,))
    if k <= 3:
        E = np.eye(4)
        return CliffordSystem(k, 4, tuple(left_mult(E[i]) for i in range(1, k + 1)))
    if k <= 7:
        E = np.eye(8)
        return CliffordSystem(k, 8, tuple(left_mult(E[i]) for i in range(1, k + 1)))
    if k == 8:
        E = np.eye(8)
        gens = []
        for v in E:
            L, Lbar = left_mult(v), left_mult(cd_conj(v))
            Z = np.zeros((8, 8))
            gens.append(np.block([[Z, L], [-Lbar, Z]]))
        return CliffordSystem(8, 16, tuple(gens))
    return _tensor_with_s8(irreducible(k - 8))


@lru_cache(maxsize=None)
def second_irreducible(k):
    """S'_k for k = 3 mod 4: right multiplication on H or O, then periodicity."""
    if k < 3 or k % 4 != 3:
        raise InvalidInput("a second irreducible module exists only for k = 3 mod 4")
    if k == 3:
        E = np.eye(4)
        return CliffordSystem(3, 4, tuple(right_mult(E[i]) for i in range(1, 4)))
    if k == 7:
        E = np.eye(8)
        return CliffordSystem(7, 8, tuple(right_mult(E[i]) for i in range(1, 8)))
    return _tensor_with_s8(second_irreducible(k - 8))


def direct_sum(S, T):
    if S.k != T.k:
        raise InvalidInput(f"cannot sum a Cl_{S.k} module with a Cl_{T.k} module")
    if T.n == 0:
        return S
    if S.n == 0:
        return T
    n = S.n + T.n
    gens = []
    for A, B in zip(S.generators, T.generators):
        M = np.zeros((n, n))
        M[:S.n, :S.n] = A
        M[S.n:, S.n:] = B
        gens.append(M)
    return CliffordSystem(S.k, n, tuple(gens))


def build(k, copies, copies_prime=0):
    """copies * S_k + copies_prime * S'_k."""
    if copies < 0 or copies_prime < 0:
        raise InvalidInput("multiplicities must be non-negative")
    if copies_prime and k % 4 != 3:
        raise InvalidInput("copies_prime must be 0 unless k = 3 mod 4")
    parts = [irreducible(k)] * copies
    if copies_prime:
        parts += [second_irreducible(k)] * copies_prime
    return reduce(direct_sum, parts, trivial_system(k))


def restrict(S):
    """Forget the last generator: a Cl_{k+1} module viewed as a Cl_k module."""
    if S.k == 0:
        raise InvalidInput("cannot restrict a Cl_0 module")
    return CliffordSystem(S.k - 1, S.n, S.generators[:-1])


def volume_element(S):
    """J_1 J_2 ... J_k (identity for k = 0)."""
    return reduce(np.matmul, S.generators, np.eye(S.n))


@lru_cache(maxsize=None)
def volume_sign(k):
    """Scalar by which the volume element acts on S_k, for k = 3 mod 4."""
    if k % 4 != 3:
        raise InvalidInput("the volume element is central only for k = 3 mod 4")
    return int(np.sign(np.trace(volume_element(irreducible(k)))))


# -- decomposition ----------------------------------------------------------

def commutant_project(X, generators):
    """Orthogonal projection onto {X : X J = J X for all J}.

    Composition of the commuting averaging maps X -> (X - J X J) / 2.
    """
    for J in generators:
        X = 0.5 * (X - J @ X @ J)
    return X


def anticommutant_project(X, generators):
    """Orthogonal projection onto {X : X J = -J X for all J}."""
    for J in generators:
        X = 0.5 * (X + J @ X @ J)
    return X


def commutant_dimension(S):
    """Dimension of the commutant, by solving the linear system J X = X J."""
    from scipy.linalg import null_space
    n = S.n
    if n > 64:
        raise InvalidInput("commutant_dimension solves an n^2 system; keep n <= 64")
    if S.k == 0:
        return n * n
    I = np.eye(n)
    rows = np.vstack([np.kron(J, I) - np.kron(I, J.T) for J in S.generators])
    return null_space(rows, rcond=1e-10).shape[1]


@dataclass(frozen=True)
class IsotypicDecomposition:
    """R^n split into irreducible summands.

    ``bases[j]`` is an orthonormal n x m_k basis of the summand V_j and
    ``labels[j]`` is +1 for a copy of S_k and -1 for a copy of S'_k.
    """

    k: int
    p: int
    q: int
    bases: tuple = field(repr=False)
    labels: tuple = ()

    @property
    def summand_dim(self):
        return irreducible_dim(self.k)


def _split_summands(S, seed, attempts=6):
    m = irreducible_dim(S.k)
    n = S.n
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        X = rng.standard_normal((n, n))
        C = commutant_project(X + X.T, S.generators)
        C = 0.5 * (C + C.T)
        w, V = np.linalg.eigh(C)
        scale = max(1.0, np.abs(w).max())
        chunks = w.reshape(-1, m)
        spread = (chunks[:, -1] - chunks[:, 0]).max() / scale
        gaps = (chunks[1:, 0] - chunks[:-1, -1]) / scale
        if spread < 1e-9 and (gaps.size == 0 or gaps.min() > 1e-6):
            return [V[:, j * m:(j + 1) * m] for j in range(n // m)]
    raise InvalidInput("could not separate the module into irreducible summands")


def decompose(S, tol=DECOMPOSE_TOL, seed=0):
    """Split a Clifford module into irreducible summands.

    Summands are eigenspaces of a random symmetric element of the commutant;
    for k = 3 mod 4 each summand is labelled by the sign of the volume
    element on it.
    """
    res = S.relation_residual()
    if res > tol:
        raise InvalidInput(f"Clifford relations violated (residual {res:.2e})")
    m = irreducible_dim(S.k)
    if S.n % m:
        raise InvalidInput(f"dimension {S.n} is not a multiple of m_{S.k} = {m}")
    if S.n == 0:
        return IsotypicDecomposition(S.k, 0, 0, (), ())
    bases = _split_summands(S, seed)
    for U in bases:
        P = U @ U.T
        for J in S.generators:
            r = np.abs(J @ U - P @ J @ U).max()
            if r > tol:
                raise InvalidInput(f"summand not invariant (residual {r:.2e})")
    if S.k % 4 == 3:
        vol = volume_element(S)
        sigma = volume_sign(S.k)
        labels = []
        for U in bases:
            s = np.trace(U.T @ vol @ U) / m
            if abs(abs(s) - 1) > tol:
                raise InvalidInput("volume element is not +-1 on a summand")
            labels.append(1 if np.sign(s) == sigma else -1)
    else:
        labels = [1] * len(bases)
    p = labels.count(1)
    return IsotypicDecomposition(S.k, p, len(labels) - p, tuple(bases), tuple(labels))


# -- the groups A_k -----------------------------------------------------------

def group_kind(k):
    r = k % 8
    if r in (0, 1):
        return "Z2"
    if r in (3, 7):
        return "Z"
    return "Zero"


@dataclass(frozen=True)
class ModuleClass:
    """An element of A_k = M_k / rho(M_{k+1})."""

    k: int
    kind: str
    value: int | None

    def __add__(self, other):
        if self.k != other.k:
            raise InvalidInput("classes live in different groups")
        if self.kind == "Zero":
            return self
        v = self.value + other.value
        return ModuleClass(self.k, self.kind, v % 2 if self.kind == "Z2" else v)

    @property
    def is_zero(self):
        return not self.value

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}

    def __str__(self):
        if self.kind == "Zero":
            return "0"
        return f"{self.value} in {self.kind}"


def class_from_multiplicities(k, p, q=0):
    kind = group_kind(k)
    if kind == "Z2":
        return ModuleClass(k, kind, p % 2)
    if kind == "Z":
        return ModuleClass(k, kind, p - q)
    return ModuleClass(k, kind, None)


def class_in_Ak(S, decomposition=None):
    D = decompose(S) if decomposition is None else decomposition
    return class_from_multiplicities(S.k, D.p, D.q)


# -- extensions ---------------------------------------------------------------

def _pair_summands(D):
    """Groups of summand indices to be extended together."""
    idx = list(range(len(D.bases)))
    r = D.k % 8
    if r in (2, 4, 5, 6):
        return [[j] for j in idx]
    if r in (0, 1):
        groups = [idx[i:i + 2] for i in range(0, len(idx), 2)]
        return groups
    plus = [j for j in idx if D.labels[j] == 1]
    minus = [j for j in idx if D.labels[j] == -1]
    groups = [[a, b] for a, b in zip(plus, minus)]
    rest = plus[len(minus):] + minus[len(plus):]
    if rest:
        groups.append(rest)
    return groups


def _extend_block(gens, rng, tol):
    """A complex structure anticommuting with ``gens`` on a small block, or None."""
    d = gens[0].shape[0] if gens else None
    if d is None:
        raise InvalidInput("block extension needs at least one generator")
    X = rng.standard_normal((d, d))
    Y = anticommutant_project(X - X.T, gens)
    Y = 0.5 * (Y - Y.T)
    sp = skew_spectral(Y)
    if sp.kernel_dim or len(sp.angles) == 0 or sp.angles.min() < tol * max(1.0, sp.angles.max()):
        return None
    return sp.assemble(np.ones_like(sp.angles))


def is_extendible(S, seed=0, tol=DECOMPOSE_TOL):
    """Whether S is the restriction of a Cl_{k+1} module.

    Returns ``(extendible, witness)``.  The witness J_{k+1} is assembled
    block by block: summands are paired (two copies of S_k when k = 0, 1 mod 8,
    an S_k with an S'_k when k = 3 mod 4, single summands otherwise), and on
    each block a generic solution of the linear anticommutation constraints is
    turned into a complex structure by its polar part.  A block whose generic
    solution is singular admits no extension.
    """
    if S.n == 0:
        return True, np.zeros((0, 0))
    if S.k == 0:
        if S.n % 2:
            return False, None
        J = np.zeros((S.n, S.n))
        for i in range(0, S.n, 2):
            J[i:i + 2, i:i + 2] = ROT
        return True, J
    D = decompose(S, tol=tol, seed=seed)
    rng = np.random.default_rng(seed)
    J = np.zeros((S.n, S.n))
    for group in _pair_summands(D):
        U = np.hstack([D.bases[j] for j in group])
        gens = [U.T @ G @ U for G in S.generators]
        Jb = _extend_block(gens, rng, tol)
        if Jb is None:
            return False, None
        J += U @ Jb @ U.T
    ext = S.extended(J)
    res = ext.relation_residual()
    if res > tol:
        raise InvalidInput(f"extension witness failed its relations (residual {res:.2e})")
    return True, J
