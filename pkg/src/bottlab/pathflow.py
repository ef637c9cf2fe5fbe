"""
Discrete path-space energy and Birkhoff midpoint shortening.

A path is a polygon x_0..x_N of orthogonal matrices with fixed endpoints and
discrete energy E = N * sum d(x_i, x_{i+1})^2 (Riemannian distances).  A
Birkhoff sweep replaces odd interior vertices by the geodesic midpoints of
their neighbours, then even ones.  Each replacement is kept only if it lowers
the two affected energy terms, compared exactly with ``math.fsum``, so the
energy sequence is non-increasing in floating point, not just in theory.

``shorten`` accelerates the sweeps by a coarse-grid correction: after a few
smoothing sweeps the polygon is subsampled (when neighbours stay well inside
the injectivity radius), shortened recursively, and prolonged back by
midpoints.  Subsampling never raises the energy and prolongation preserves
it, so the correction is accepted only when it lowers the fine energy.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BranchError, InvalidInput, NonConvergence, ResolutionError
from .liegroup import (
    GroupGeodesic, distance, geodesic_interpolate, geodesic_midpoint, logm, midpoint_and_distance,
    orthogonality_residual, skew_spectral, unit_part,
)

# coarse steps must stay below the convexity radius pi/sqrt(2) of SO(n) in this
# metric: then every sweep at the coarse level keeps the homotopy class
COARSE_STEP = 2.0
MIN_COARSE_N = 4
PRE_SWEEPS = 2
# sweeps spent smoothing large jumps before the coarse level is tried
PRESMOOTH_LIMIT = 32
RESEED_MAGNITUDE = 1e-3
RESEED_ATTEMPTS = 2
# below this energy the stopping test is absolute: contracting loops decay geometrically
ENERGY_FLOOR = 1.0
# relative gain above which a midpoint move is accepted on its analytic length
ANALYTIC_MARGIN = 1e-12


@dataclass(frozen=True)
class FlowConfig:
    T: int = 64
    N: int = 64
    tol: float = 1e-9
    max_sweeps: int = 2000
    seed: int = 0
    workers: int = 1
    angle_tol: float = 1e-4

    def __post_init__(self):
        for name in ("T", "N", "max_sweeps"):
            if getattr(self, name) <= 0:
                raise InvalidInput(f"{name} must be positive")
        if self.tol <= 0:
            raise InvalidInput("tol must be positive")
        if self.N % self.T:
            raise InvalidInput("N must be a multiple of T (meridians are refined geodesically)")

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def to_dict(self):
        return asdict(self)


# -- paths --------------------------------------------------------------------

@dataclass(frozen=True)
class DiscretePath:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 3 or pts.shape[1] != pts.shape[2]:
            raise InvalidInput("path points must have shape (N+1, n, n)")
        if pts.shape[0] < 3:
            raise InvalidInput("a path needs N >= 2 segments")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def N(self):
        return self.points.shape[0] - 1

    @property
    def n(self):
        return self.points.shape[1]

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]


def segment_terms(points):
    return [distance(points[i], points[i + 1]) ** 2 for i in range(len(points) - 1)]


def _energy_from_terms(terms):
    return len(terms) * math.fsum(terms)


def discrete_energy(path):
    """N * sum of squared Riemannian step lengths."""
    return _energy_from_terms(segment_terms(path.points))


def path_length(path):
    return math.fsum(math.sqrt(t) for t in segment_terms(path.points))


class CentrioleRetraction:
    """Nearest complex structure anticommuting with a chain.

    Midpoints of points in a centriole stay in it exactly, but not in
    floating point, and a loop that is non-contractible in the centriole can
    be contractible in SO(n); without this retraction rounding errors grow
    along those unstable directions.
    """

    def __init__(self, chain):
        self.chain = [np.asarray(J, dtype=float) for J in chain]

    def __call__(self, P):
        from .clifford import anticommutant_project
        Y = anticommutant_project(P, self.chain)
        Y = 0.5 * (Y - Y.T)
        for _ in range(2):
            # Newton step for the polar factor of a skew matrix
            Y = 0.5 * (Y - np.linalg.inv(Y))
            Y = 0.5 * (Y - Y.T)
        return Y


def _sweep(points, terms, retract=None):
    """One red-black midpoint sweep in place; returns the number of moves.

    Without a retraction both halves of a midpoint move have squared length
    d(y, z)^2 / 4, read off the Schur form that gave the midpoint; that value
    decides moves which gain clearly.  Close calls are settled exactly: the
    move must beat both the stored terms and freshly computed old terms, so
    the recorded and the true energy both decrease.
    """
    N = len(points) - 1
    moved = 0
    for start in (1, 2):
        for i in range(start, N, 2):
            y, z = points[i - 1], points[i + 1]
            old = terms[i - 1] + terms[i]
            if retract is None:
                m, d = midpoint_and_distance(y, z)
                half = 0.25 * d * d
                if 2 * half < old * (1 - ANALYTIC_MARGIN):
                    points[i] = m
                    terms[i - 1] = terms[i] = half
                    moved += 1
                    continue
            else:
                m = retract(geodesic_midpoint(y, z))
            a, b = distance(y, m) ** 2, distance(m, z) ** 2
            if math.fsum([a, b, -terms[i - 1], -terms[i]]) >= 0:
                continue
            if retract is None:
                exact = [distance(y, points[i]) ** 2, distance(points[i], z) ** 2]
                if math.fsum([a, b] + [-t for t in exact]) >= 0:
                    continue
            points[i] = m
            terms[i - 1], terms[i] = a, b
            moved += 1
    return moved


def birkhoff_sweep(path, retract=None):
    pts = np.array(path.points)
    _sweep(pts, segment_terms(pts), retract)
    return DiscretePath(pts)


def geodesic_defect(points):
    """Largest distance from an interior vertex to its neighbours' midpoint."""
    return max((distance(points[i], geodesic_midpoint(points[i - 1], points[i + 1]))
                for i in range(1, len(points) - 1)), default=0.0)


def refine(points, factor, retract=None):
    """Insert ``factor - 1`` geodesic points into every segment."""
    if factor == 1:
        return np.array(points)
    out = [points[0]]
    for P, Q in zip(points[:-1], points[1:]):
        for s in range(1, factor):
            M = geodesic_interpolate(P, Q, s / factor)
            out.append(M if retract is None else retract(M))
        out.append(Q)
    return np.array(out)


def fit_geodesic(points):
    """Geodesic x_0 expm(pi t A) with A from the averaged one-step logarithms."""
    N = len(points) - 1
    logs = [logm(points[i].T @ points[i + 1]) for i in range(N)]
    A = (N / np.pi) * np.mean(logs, axis=0)
    return GroupGeodesic(points[0], 0.5 * (A - A.T))


@dataclass
class ShortenResult:
    path: DiscretePath
    geodesic: GroupGeodesic
    angles: np.ndarray
    kernel_dim: int
    sweeps: int
    energies: list = field(default_factory=list)
    converged: bool = True
    deviation: float = 0.0
    defect: float = 0.0

    @property
    def energy(self):
        return self.energies[-1]

    def summary(self):
        return {"sweeps": self.sweeps, "energy": self.energy, "converged": self.converged,
                "deviation": self.deviation, "defect": self.defect,
                "angles": [float(a) for a in self.angles], "kernel_dim": self.kernel_dim}


def _coarsenable(points):
    N = len(points) - 1
    if N % 2 or N // 2 < MIN_COARSE_N:
        return False
    coarse = points[::2]
    try:
        return all(distance(coarse[i], coarse[i + 1]) < COARSE_STEP
                   for i in range(len(coarse) - 1))
    except BranchError:
        return False


def _relax(points, terms, energies, tol, max_sweeps, retract=None):
    """Sweep until the energy decrease drops below tol * max(E, ENERGY_FLOOR)."""
    sweeps = 0
    while sweeps < max_sweeps:
        _sweep(points, terms, retract)
        sweeps += 1
        energies.append(_energy_from_terms(terms))
        prev, cur = energies[-2], energies[-1]
        if prev <= 0 or (prev - cur) <= tol * max(prev, ENERGY_FLOOR):
            return sweeps, True
    return sweeps, False


def _shorten_points(points, tol, max_sweeps, energies, retract=None):
    """Multilevel shortening in place; returns (sweeps, converged)."""
    terms = segment_terms(points)
    energies.append(_energy_from_terms(terms))
    sweeps = 0
    N = len(points) - 1
    if N % 2 == 0 and N // 2 >= MIN_COARSE_N:
        while sweeps < PRESMOOTH_LIMIT and not _coarsenable(points):
            _sweep(points, terms, retract)
            sweeps += 1
            energies.append(_energy_from_terms(terms))
        for _ in range(PRE_SWEEPS):
            _sweep(points, terms, retract)
            sweeps += 1
            energies.append(_energy_from_terms(terms))
        if _coarsenable(points):
            coarse = np.array(points[::2])
            c_sweeps, _ = _shorten_points(coarse, tol, max_sweeps, [], retract)
            sweeps += c_sweeps
            fine = refine(coarse, 2, retract)
            fine_terms = segment_terms(fine)
            if _energy_from_terms(fine_terms) <= energies[-1]:
                points[:] = fine
                terms[:] = fine_terms
                energies.append(_energy_from_terms(terms))
    s, ok = _relax(points, terms, energies, tol, max_sweeps, retract)
    return sweeps + s, ok


def shorten(path, tol=1e-9, max_sweeps=2000, angle_tol=1e-4, check_odd=True, retract=None):
    """Shorten a path to (an approximation of) a geodesic with the same ends.

    Raises NonConvergence, carrying the ShortenResult, when the sweep budget
    runs out or when a path between antipodal endpoints (J, -J) ends on a
    geodesic whose angles are not odd integers.  ``retract`` (for example a
    CentrioleRetraction) is applied to every new vertex to keep the path on
    a constraint set.
    """
    pts = np.array(path.points)
    if geodesic_defect(pts) < 1e-10:
        energies = [discrete_energy(path)]
        sweeps, converged = 0, True
    else:
        energies = []
        for attempt in range(3):
            try:
                sweeps, converged = _shorten_points(pts, tol, max_sweeps, energies, retract)
                break
            except BranchError:
                if attempt == 2:
                    raise
                pts = refine(np.array(path.points), 2 ** (attempt + 1), retract)
                energies = []
    geo = fit_geodesic(pts)
    sp = skew_spectral(geo.velocity)
    N = len(pts) - 1
    deviation = max(distance(p, q) for p, q in
                    zip(pts, geo.sample(np.linspace(0.0, 1.0, N + 1))))
    res = ShortenResult(DiscretePath(pts), geo, sp.angles, sp.kernel_dim, sweeps, energies,
                        converged, deviation, geodesic_defect(pts))
    if not converged:
        raise NonConvergence(f"no convergence within {max_sweeps} sweeps", res)
    if check_odd and np.abs(pts[-1] + pts[0]).max() < 1e-8:
        odd = 2 * np.round((sp.angles - 1) / 2) + 1
        if sp.kernel_dim or np.abs(sp.angles - odd).max(initial=0.0) > angle_tol:
            raise NonConvergence("geodesic between antipodal points has non-odd angles", res)
    return res


def random_path(n, N, seed=0, amplitude=1.0, modes=3, velocity=None):
    """A smooth random path from I to -I in SO(n).

    A minimal geodesic (random frame, all angles 1, or ``velocity`` if
    given) times expm of a random trigonometric perturbation vanishing at
    both ends.
    """
    if n % 2:
        raise InvalidInput("-I lies in SO(n) only for even n")
    rng = np.random.default_rng(seed)
    if velocity is None:
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        D = np.zeros((n, n))
        for j in range(0, n, 2):
            D[j, j + 1], D[j + 1, j] = -1.0, 1.0
        velocity = Q @ D @ Q.T
    geo = GroupGeodesic(np.eye(n), velocity)
    Xs = []
    for m in range(1, modes + 1):
        X = rng.standard_normal((n, n))
        X = X - X.T
        Xs.append(X / np.linalg.norm(X) / m)
    from .liegroup import expm
    ts = np.linspace(0.0, 1.0, N + 1)
    pts = []
    for t, g in zip(ts, geo.sample(ts)):
        P = amplitude * sum(np.sin(m * np.pi * t) * X for m, X in enumerate(Xs, 1))
        pts.append(g @ expm(P))
    pts[0], pts[-1] = np.eye(n), geo(1.0)
    return DiscretePath(np.array(pts))


# -- sphere grids and map families --------------------------------------------

class SphereGrid:
    """Meridian-recursive grid of S^k.

    Nodes 0 and 1 are the poles N = e_{k+1} and -N.  Then, for every node v
    of the equator grid (S^{k-1}) in order, the T - 1 interior points
    sin(pi t) v + cos(pi t) N, t = i / T.  S^0 is the pair (+1, -1).
    """

    def __init__(self, k, T):
        if k < 0 or T < 2:
            raise InvalidInput("need k >= 0 and T >= 2")
        self.k, self.T = k, T
        if k == 0:
            self.equator = None
            self.nodes = np.array([[1.0], [-1.0]])
            self.times = np.array([0.0, 1.0])
            return
        self.equator = SphereGrid(k - 1, T)
        nodes = [np.eye(k + 1)[k], -np.eye(k + 1)[k]]
        times = [0.0, 1.0]
        for v in self.equator.nodes:
            for i in range(1, T):
                t = i / T
                nodes.append(np.append(np.sin(np.pi * t) * v, np.cos(np.pi * t)))
                times.append(t)
        self.nodes = np.array(nodes)
        self.times = np.array(times)

    def __len__(self):
        return len(self.nodes)

    @property
    def num_meridians(self):
        return 0 if self.equator is None else len(self.equator)

    def meridian(self, j):
        """Node indices of the meridian through equator node j, N to -N."""
        base = 2 + j * (self.T - 1)
        return [0] + list(range(base, base + self.T - 1)) + [1]

    def __eq__(self, other):
        return isinstance(other, SphereGrid) and (self.k, self.T) == (other.k, other.T)


@dataclass(frozen=True)
class MapFamily:
    """A map from a sphere grid into SO(n): one matrix per grid node."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 3 or vals.shape[0] != len(self.grid):
            raise InvalidInput(f"expected {len(self.grid)} values, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def k(self):
        return self.grid.k

    @property
    def n(self):
        return self.values.shape[1]

    def meridian_values(self, j):
        return self.values[self.grid.meridian(j)]

    def orthogonality_residual(self):
        return max(orthogonality_residual(V) for V in self.values)

    def map_values(self, fn):
        return MapFamily(self.grid, np.array([fn(V) for V in self.values]))

    def to_dict(self):
        return {"k": self.k, "T": self.grid.T,
                "nodes": [{"coords": c.tolist(), "value": V.tolist()}
                          for c, V in zip(self.grid.nodes, self.values)]}

    @classmethod
    def from_dict(cls, d, tol=1e-8):
        try:
            grid = SphereGrid(int(d["k"]), int(d["T"]))
            nodes = d["nodes"]
            coords = np.array([nd["coords"] for nd in nodes], dtype=float)
            values = np.array([nd["value"] for nd in nodes], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed map family: {exc}") from exc
        if coords.shape != grid.nodes.shape or np.abs(coords - grid.nodes).max() > 1e-9:
            raise InvalidInput("node coordinates do not match the meridian grid for (k, T)")
        fam = cls(grid, values)
        res = fam.orthogonality_residual()
        if res > tol:
            raise InvalidInput(f"family value is not orthogonal (residual {res:.2e})")
        if any(np.linalg.det(V) < 0 for V in fam.values):
            raise InvalidInput("family values must lie in SO(n)")
        return fam

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"malformed JSON: {exc}") from exc
        return cls.from_dict(d)


# -- pole normalisation -------------------------------------------------------

def _bump(t, start=0.5, width=0.25):
    s = np.clip((np.asarray(t) - start) / width, 0.0, 1.0)
    return s * s * (3 - 2 * s)


def _constrained_complex_structure(d, commute, anticommute, seed):
    from .clifford import anticommutant_project, commutant_project
    rng = np.random.default_rng(seed)
    for _ in range(4):
        X = rng.standard_normal((d, d))
        Y = anticommutant_project(commutant_project(X - X.T, commute), anticommute)
        Y = 0.5 * (Y - Y.T)
        sp = skew_spectral(Y)
        if not sp.kernel_dim and len(sp.angles) and sp.angles.min() > 1e-8 * sp.angles.max():
            return sp.assemble(np.ones_like(sp.angles))
    return None


def constrained_log(M, commute=(), anticommute=(), seed=0):
    """A logarithm of the orthogonal M whose exponential path respects constraints.

    Off the -1 eigenspace this is the principal logarithm.  On the -1
    eigenspace E (where the principal branch is ambiguous) it is pi * J_E
    for a complex structure J_E on E commuting with ``commute`` and
    anticommuting with ``anticommute`` (all restricted to E).
    """
    from .liegroup import _schur_blocks
    n = M.shape[0]
    Z, blocks = _schur_blocks(M)
    L = np.zeros((n, n))
    E_cols = []
    for i, B in blocks:
        if B.shape[0] == 2:
            theta = np.arctan2(0.5 * (B[1, 0] - B[0, 1]), 0.5 * (B[0, 0] + B[1, 1]))
            if abs(theta) > np.pi - 1e-6:
                E_cols.extend([i, i + 1])
            else:
                L[i:i + 2, i:i + 2] = [[0.0, -theta], [theta, 0.0]]
        elif B[0, 0] < 0:
            E_cols.append(i)
    L = Z @ L @ Z.T
    if E_cols:
        U = Z[:, E_cols]
        JE = _constrained_complex_structure(
            len(E_cols), [U.T @ C @ U for C in commute], [U.T @ A @ U for A in anticommute], seed)
        if JE is None:
            raise BranchError("no admissible rotation through the -1 eigenspace")
        L = L + np.pi * (U @ JE @ U.T)
    return 0.5 * (L - L.T)


def normalize_poles(family, chain=None, seed=0):
    """Deform a family so its poles are (I, -I), or (J, -J) inside a centriole.

    Level 0 (``chain is None``): right-translate by phi(N)^{-1}, then right
    multiply values near -N by expm(beta * L) with expm(L) = -phi(-N)^{-1}.
    Inside P_s (``chain`` = J_1..J_{s-1}, possibly empty) values are
    conjugated by expm(-beta * L / 2) with L tangent to P_s at phi(-N), which
    keeps them in P_s.  ``beta`` is a smooth bump of the meridian time that
    vanishes on the northern half and equals 1 near -N.
    """
    grid = family.grid
    if family.n % 2:
        raise InvalidInput("-I is not in SO(n) for odd n; pad the family first")
    beta = _bump(grid.times)
    if chain is None:
        V = family.values @ family.values[0].T
        R0 = V[1]
        L = constrained_log(-R0.T, seed=seed)
        sp = skew_spectral(L)
        out = np.array([Vi @ sp.rotation(b) for Vi, b in zip(V, beta)])
        out[0] = np.eye(family.n)
        out[1] = -np.eye(family.n)
    else:
        X, Y0 = family.values[0], family.values[1]
        L = constrained_log(-Y0.T @ X, commute=list(chain), anticommute=[Y0], seed=seed)
        sp = skew_spectral(L)
        out = []
        for Vi, b in zip(family.values, beta):
            g = sp.rotation(-0.5 * b)
            out.append(g @ Vi @ g.T)
        out = np.array(out)
        out[1] = -X
    return MapFamily(grid, out)


# -- flows of families ----------------------------------------------------------

def tangent_constraints_project(A, chain, base):
    """Project a skew A onto {A : A J = J A for J in chain, A base = -base A}."""
    from .clifford import anticommutant_project, commutant_project
    A = commutant_project(A, chain)
    if base is not None:
        A = anticommutant_project(A, [base])
    return 0.5 * (A - A.T)


def _perturb(points, chain, seed, magnitude):
    """Small smooth perturbation of the interior keeping points in the centriole."""
    from .clifford import commutant_project
    from .liegroup import expm
    rng = np.random.default_rng(seed)
    n = points.shape[1]
    X = rng.standard_normal((n, n))
    X = X - X.T
    if chain is not None:
        X = commutant_project(X, chain)
    X *= magnitude / max(np.linalg.norm(X), 1e-300)
    N = len(points) - 1
    out = np.array(points)
    for i in range(1, N):
        g = expm(np.sin(np.pi * i / N) * X)
        out[i] = points[i] @ g if chain is None else g @ points[i] @ g.T
    return out


@dataclass
class MeridianResult:
    index: int
    midpoint: np.ndarray | None
    report: dict
    error: str | None = None


def _flow_meridian(args):
    j, pts, chain, config = args
    base = pts[0]
    last = None
    for attempt in range(RESEED_ATTEMPTS + 1):
        trial = pts if attempt == 0 else _perturb(pts, chain, config.seed + 7919 * j + attempt,
                                                   RESEED_MAGNITUDE)
        try:
            res = shorten(DiscretePath(trial), config.tol, config.max_sweeps, config.angle_tol,
                          retract=None if chain is None else CentrioleRetraction(chain))
        except NonConvergence as exc:
            last = exc
            continue
        if res.kernel_dim or np.abs(res.angles - 1.0).max() > config.angle_tol:
            last = NonConvergence(f"meridian converged to a non-minimal geodesic "
                                  f"(angles {np.round(res.angles, 4).tolist()})", res)
            continue
        A = res.geodesic.velocity
        if chain is not None:
            A = tangent_constraints_project(A, chain, base)
        Ju = unit_part(A)
        mid = base @ Ju
        report = res.summary()
        report["reseeds"] = attempt
        report["index_midpoint_gap"] = float(distance(mid, res.path.points[len(trial) // 2])) \
            if (len(trial) - 1) % 2 == 0 else None
        return MeridianResult(j, mid, report)
    rep = last.report.summary() if last is not None and last.report is not None else {}
    return MeridianResult(j, None, rep, str(last))


@dataclass
class FlowReport:
    meridians: list
    failures: list

    def summary(self):
        energies = [m.report.get("energy") for m in self.meridians if m.report]
        sweeps = [m.report.get("sweeps", 0) for m in self.meridians if m.report]
        return {"meridians": len(self.meridians), "failures": self.failures,
                "max_energy": max(energies, default=None),
                "total_sweeps": int(sum(sweeps)),
                "reseeds": int(sum(m.report.get("reseeds", 0) for m in self.meridians))}


def flow_family(family, chain=None, config=None, check_tol=1e-6):
    """Shorten every meridian and return the midpoint family on the equator.

    ``chain`` is None at the group level (poles I, -I) or the list
    J_1..J_{s-1} when the family lies in P_s with poles (J_s, -J_s); the
    midpoints then lie in P_{s+1}.  Failures are aggregated by grid node.
    """
    config = config or FlowConfig()
    grid = family.grid
    if grid.k < 1:
        raise InvalidInput("flow_family needs a family on S^k with k >= 1")
    X = family.values[0]
    if np.abs(family.values[1] + X).max() > 1e-8:
        raise InvalidInput("family is not normalised: poles are not (J, -J)")
    if chain is None and np.abs(X - np.eye(family.n)).max() > 1e-8:
        raise InvalidInput("family is not normalised: phi(N) != I")
    if config.N % grid.T and grid.T % config.N:
        raise InvalidInput(f"path points N={config.N} incompatible with meridian samples T={grid.T}")
    factor = max(1, config.N // grid.T)
    retract = None if chain is None else CentrioleRetraction(chain)
    jobs = [(j, refine(family.meridian_values(j), factor, retract),
             None if chain is None else [np.asarray(c) for c in chain], config)
            for j in range(grid.num_meridians)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_flow_meridian, jobs))
    else:
        results = [_flow_meridian(job) for job in jobs]
    results.sort(key=lambda r: r.index)
    failures = [{"node": r.index, "coords": grid.equator.nodes[r.index].tolist(),
                 "error": r.error} for r in results if r.midpoint is None]
    report = FlowReport(results, failures)
    if failures:
        raise NonConvergence(f"{len(failures)} meridian(s) failed to converge", report)
    mids = np.array([r.midpoint for r in results])
    deeper = ([] if chain is None else list(chain)) + ([] if chain is None else [X])
    I = np.eye(family.n)
    for r, m in zip(results, mids):
        res = np.abs(m @ m + I).max()
        for J in deeper:
            res = max(res, np.abs(m @ J + J @ m).max())
        if res > check_tol:
            raise ResolutionError(f"midpoint at node {r.index} is not in the next centriole "
                                  f"(residual {res:.2e}); increase T or N")
    return MapFamily(grid.equator, mids), report
