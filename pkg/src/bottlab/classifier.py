"""
Classification of clutching maps S^k -> SO(n) into A_k.

The cascade: normalise the poles to (I, -I), shorten every meridian to a
minimal geodesic and keep the midpoints, which form a map S^{k-1} -> P_1.
Repeat inside P_1, P_2, ... until a loop S^1 -> P_{k-1} remains.  The loop
is shortened to a closed geodesic J_{k-1} expm(2 pi t A), A = J' on the
range of A, and J_{k-1} J' completes the Clifford system.

Conventions, fixed here once:

* The north pole is the last coordinate, N = e_{k+1}; meridians run from N
  to -N through sin(pi t) v + cos(pi t) N.
* Stage s keeps J'_s = phi_s(N_s), the value at the north pole of S^{k-s}.
  For a Hopf map phi_S these are J'_s = J_{k+1-s}, so the recovered system
  lists the stage points in reverse: (J'_k, J'_{k-1}, ..., J'_1).
* J' is the unit part of the closed-geodesic velocity, with all angles
  positive.  With these choices classify(hopf_clutching(S)) reproduces S
  itself, so the class in Z carries the sign of the clifford module (the
  left quaternion model of S_3 maps to +1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordSystem, ModuleClass, class_in_Ak, irreducible_dim
from .errors import BranchError, InvalidInput, NonConvergence, ResolutionError
from .liegroup import orthogonality_residual, skew_spectral
from .pathflow import (
    CentrioleRetraction, DiscretePath, FlowConfig, MapFamily, _perturb, flow_family,
    normalize_poles, refine, shorten, tangent_constraints_project,
)

DEFAULT_MAX_K = 3
INTEGER_TOL = 1e-2
MAX_PADDING_ROUNDS = 3
RECOVERY_TOL = 1e-6


def hopf_clutching(S, grid):
    """The linear clutching map v -> v_{k+1} I + sum_i v_i J_i on a sphere grid."""
    if isinstance(grid, int):
        raise InvalidInput("pass a SphereGrid, not a sample count")
    if grid.k != S.k:
        raise InvalidInput(f"grid is on S^{grid.k} but the system has k = {S.k}")
    if S.n == 0:
        raise InvalidInput("the Hopf map of the zero module is empty")
    gens = np.array(S.generators) if S.k else np.zeros((0, S.n, S.n))
    I = np.eye(S.n)
    vals = [v[-1] * I + np.tensordot(v[:-1], gens, axes=1) for v in grid.nodes]
    return MapFamily(grid, np.array(vals))


def linear_to_module(frame_values, tol=1e-8, samples=8, seed=0):
    """Recover J_i = phi(e_i) phi(e_{k+1})^{-1} from the images of a frame."""
    vals = [np.asarray(V, dtype=float) for V in frame_values]
    if not vals:
        raise InvalidInput("need at least phi(e_{k+1})")
    for V in vals:
        if V.shape != vals[0].shape or orthogonality_residual(V) > tol:
            raise InvalidInput("frame values must be orthogonal matrices of one size")
    k, n = len(vals) - 1, vals[0].shape[0]
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        w = rng.standard_normal(k + 1)
        w /= np.linalg.norm(w)
        M = np.tensordot(w, np.array(vals), axes=1)
        if orthogonality_residual(M) > 10 * tol:
            raise InvalidInput("the span does not map the sphere into the orthogonal group")
    inv = vals[-1].T
    gens = tuple(V @ inv for V in vals[:-1])
    S = CliffordSystem(k, n, gens)
    skew = max((np.abs(J + J.T).max() for J in gens), default=0.0)
    res = max(S.relation_residual(), skew)
    if res > tol:
        raise InvalidInput(f"not a linear clutching map (relation residual {res:.2e})")
    return S


@dataclass
class BundleReport:
    """E = E_0 + E_1 with E_0 trivial and E_1 the Hopf bundle of ``system``."""

    k: int
    n: int
    module_class: ModuleClass
    system: CliffordSystem
    trivial_rank: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"k": self.k, "n": self.n, "class": self.module_class.to_dict(),
                "trivial_rank": self.trivial_rank, "system": self.system.to_dict(),
                "diagnostics": self.diagnostics}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _pad_family(family, d):
    if d == 0:
        return family
    n = family.n
    vals = np.zeros((len(family.values), n + d, n + d))
    vals[:, :n, :n] = family.values
    vals[:, n:, n:] = np.eye(d)
    return MapFamily(family.grid, vals)


def _pad_amount(n, k):
    step = max(2, irreducible_dim(k))
    return (-n) % step


def _loop_points(family, factor, retract=None):
    """N -> -N along the meridian through +e_1, back along the one through -e_1."""
    out = refine(family.meridian_values(0), factor, retract)
    back = refine(family.meridian_values(1)[::-1], factor, retract)
    return np.concatenate([out, back[1:]])


def _block_pad(points, chain, U):
    """Add a copy of the summand U (as a module over the chain) with the loop constant there."""
    d = U.shape[1]
    base = points[0]
    n = base.shape[0]

    def pad(M, E):
        out = np.zeros((n + d, n + d))
        out[:n, :n] = M
        out[n:, n:] = E
        return out

    fixed = U.T @ base @ U if chain else np.eye(d)
    new_points = np.array([pad(P, fixed) for P in points])
    new_chain = [pad(J, U.T @ J @ U) for J in chain]
    return new_points, new_chain


def _stage_summary(stage, level, n, report, shift):
    s = report.summary() if report is not None else {}
    s.update({"stage": stage, "level": level, "n": n, "normalization_shift": shift})
    return s


def _normalize(family, chain, seed, stage):
    try:
        out = normalize_poles(family, chain, seed=seed)
    except BranchError as exc:
        raise ResolutionError(f"stage {stage}: pole normalization is ambiguous ({exc}); "
                              f"re-sample the family") from exc
    shift = float(np.abs(out.values - family.values).max())
    return out, shift


def classify(family, k=None, config=None, max_k=DEFAULT_MAX_K, integer_tol=INTEGER_TOL,
             max_padding=MAX_PADDING_ROUNDS):
    """Deform a clutching map into a generalized Hopf map and read off its class."""
    config = config or FlowConfig()
    k = family.k if k is None else k
    if k != family.k:
        raise InvalidInput(f"family lives on S^{family.k}, not S^{k}")
    if k < 1:
        raise InvalidInput("classify needs k >= 1")
    if k > max_k:
        raise InvalidInput(f"k = {k} exceeds the resource cap {max_k}; raise max_k explicitly")
    res = family.orthogonality_residual()
    if res > 1e-8:
        raise InvalidInput(f"family values are not orthogonal (residual {res:.2e})")
    n_in = family.n
    pad = _pad_amount(n_in, k)
    fam = _pad_family(family, pad)
    n = fam.n
    diagnostics = {"input_n": n_in, "initial_padding": pad, "stages": []}

    fam, shift = _normalize(fam, None, config.seed, 0)
    chain = []
    for stage in range(1, k):
        level_chain = None if stage == 1 else chain[:-1]
        try:
            fam, report = flow_family(fam, level_chain, config)
        except NonConvergence as exc:
            raise NonConvergence(f"stage {stage}: {exc}", exc.report) from exc
        except ResolutionError as exc:
            raise ResolutionError(f"stage {stage}: {exc}") from exc
        diagnostics["stages"].append(_stage_summary(stage, stage - 1, n, report, shift))
        chain = chain + [fam.values[0]]
        fam, shift = _normalize(fam, chain[:-1], config.seed, stage)

    # closed geodesic through J'_{k-1} (through I when k = 1)
    factor = max(1, config.N // fam.grid.T)
    loop_chain = chain[:-1]
    base_J = chain[-1] if chain else None
    points = _loop_points(fam, factor, None if base_J is None else CentrioleRetraction(loop_chain))
    padding_rounds = 0
    while True:
        try:
            velocity, summary = _shorten_blocks(points, loop_chain if base_J is not None else None,
                                                config)
        except NonConvergence as exc:
            raise NonConvergence(f"loop stage: {exc}", exc.report) from exc
        A = velocity / 2
        if base_J is not None:
            A = tangent_constraints_project(A, loop_chain, points[0])
        sp = skew_spectral(A)
        rounded = np.round(sp.angles)
        err = float(np.abs(sp.angles - rounded).max(initial=0.0))
        loop_diag = {"stage": "loop", "n": points.shape[1], **summary,
                     "loop_angles": [float(a) for a in sp.angles], "integer_error": err}
        if err > integer_tol:
            raise ResolutionError(f"loop stage: closed geodesic has non-integer angles "
                                  f"(error {err:.2e}); increase T or N")
        big = [j for j, a in enumerate(rounded) if a >= 2]
        if not big:
            break
        if padding_rounds >= max_padding:
            diagnostics["stages"].append(loop_diag)
            raise NonConvergence(f"loop stage: angles {rounded.tolist()} stay outside the "
                                 f"minimality window after {max_padding} padding rounds")
        # a copy of the offending summand in the kernel lets the flow cut the corner
        U = sp.plane(big[0])
        if base_J is not None:
            U = _invariant_span(U, [A] + loop_chain + [points[0]])
        gens_chain = loop_chain + ([points[0]] if base_J is not None else [])
        points, padded = _block_pad(points, gens_chain, U)
        if base_J is not None:
            loop_chain = padded[:-1]
            chain = [_pad_matrix(J, U) for J in chain]
        points = _perturb(points, loop_chain if base_J is not None else None,
                          config.seed + 101 * padding_rounds, 1e-3)
        padding_rounds += 1
        diagnostics["stages"].append(loop_diag)
    diagnostics["stages"].append(loop_diag)
    diagnostics["padding_rounds"] = padding_rounds
    n = points.shape[1]

    nz = int(np.count_nonzero(rounded))
    Jp = sp.assemble(np.where(rounded > 0, 1.0, 0.0))
    Up = sp.frame[:, :2 * nz]
    Jk = Jp if base_J is None else chain[-1] @ Jp
    stage_points = [Jk] + chain[::-1]
    gens = tuple(Up.T @ J @ Up for J in stage_points)
    system = CliffordSystem(k, Up.shape[1], gens)
    rres = system.relation_residual()
    diagnostics["recovery_residual"] = rres
    if rres > RECOVERY_TOL:
        raise ResolutionError(f"recovered system violates the Clifford relations "
                              f"(residual {rres:.2e}); increase T or N")
    cls = class_in_Ak(system) if system.n else _zero_class(k)
    return BundleReport(k, n, cls, system, n - system.n, diagnostics)


def invariant_blocks(ops, seed=0, tol=1e-9):
    """Orthonormal bases of subspaces invariant under every orthogonal matrix in ``ops``.

    A random symmetric element of the commutant is diagonalised; its
    eigenspaces are invariant.  The commutant is the null space of
    sum_P (2I - P(x)P - P^T(x)P^T), which is what P X = X P says for
    orthogonal P.
    """
    ops = [np.asarray(P, dtype=float) for P in ops]
    n = ops[0].shape[0]
    G = np.zeros((n * n, n * n))
    for P in ops:
        G -= np.kron(P, P) + np.kron(P.T, P.T)
    G += 2 * len(ops) * np.eye(n * n)
    w, V = np.linalg.eigh(G)
    null = V[:, w <= tol * len(ops)]
    if null.shape[1] <= 1:
        return [np.eye(n)]
    rng = np.random.default_rng(seed)
    X = (null @ rng.standard_normal(null.shape[1])).reshape(n, n)
    ev, U = np.linalg.eigh(X + X.T)
    cuts = np.flatnonzero(np.diff(ev) > 1e-6 * max(1.0, np.abs(ev).max())) + 1
    blocks = np.split(U, cuts, axis=1)
    for B in blocks:
        for P in ops:
            if np.abs(P @ B - B @ (B.T @ P @ B)).max() > 1e-8:
                return [np.eye(n)]
    return blocks


def _shorten_blocks(points, chain, config):
    """Shorten a loop summand by summand; returns (velocity, diagnostics).

    Exact Birkhoff steps keep an invariant splitting, but a summand sitting
    on a saddle (a great circle, say) can be pushed off it by round-off
    while its neighbours are still relaxing.  Flowing each summand on its
    own removes that coupling.
    """
    n = points.shape[1]
    ops = list(points) + list(chain or [])
    velocity = np.zeros((n, n))
    agg = {"sweeps": 0, "energy": 0.0, "converged": True, "deviation": 0.0, "defect": 0.0,
           "blocks": 0}
    for U in invariant_blocks(ops, config.seed):
        pts = np.einsum("ji,tjk,kl->til", U, points, U)
        if np.abs(pts - pts[0]).max() <= 1e-12:
            continue
        retract = None if chain is None else CentrioleRetraction([U.T @ J @ U for J in chain])
        res = shorten(DiscretePath(pts), config.tol, config.max_sweeps, check_odd=False,
                      retract=retract)
        velocity += U @ res.geodesic.velocity @ U.T
        s = res.summary()
        agg["sweeps"] += s["sweeps"]
        agg["energy"] += s["energy"]
        agg["deviation"] = max(agg["deviation"], s["deviation"])
        agg["defect"] = max(agg["defect"], s["defect"])
        agg["blocks"] += 1
    return velocity, agg


def _pad_matrix(J, U):
    n, d = J.shape[0], U.shape[1]
    out = np.zeros((n + d, n + d))
    out[:n, :n] = J
    out[n:, n:] = U.T @ J @ U
    return out


def _invariant_span(U, ops, tol=1e-8):
    """Smallest subspace containing span(U) and invariant under ``ops``."""
    basis = np.linalg.qr(U)[0]
    while True:
        grown = np.hstack([basis] + [M @ basis for M in ops])
        u, s, _ = np.linalg.svd(grown, full_matrices=False)
        new = u[:, s > tol * s.max()]
        if new.shape[1] == basis.shape[1]:
            return new
        basis = new


def _zero_class(k):
    from .clifford import class_from_multiplicities
    return class_from_multiplicities(k, 0, 0)


def split_report(report):
    """Human-readable E = E_0 + E_1 summary."""
    lines = [f"bundle over S^{report.k + 1} of rank {report.n}",
             f"class in A_{report.k}: {report.module_class}"]
    e1 = report.system.n
    if e1 == 0:
        lines.append(f"E = E_0 (trivial, rank {report.trivial_rank}); E_1 absent")
    else:
        lines.append(f"E = E_0 + E_1 with rank E_0 = {report.trivial_rank}, rank E_1 = {e1}")
        with np.printoptions(precision=3, suppress=True, linewidth=120):
            for i, J in enumerate(report.system.generators, 1):
                lines.append(f"J_{i} =\n{J}")
    for st in report.diagnostics.get("stages", []):
        name = st.get("stage")
        bits = [f"{key}={st[key]:.6g}" if isinstance(st[key], float) else f"{key}={st[key]}"
                for key in ("energy", "max_energy", "total_sweeps", "sweeps",
                            "integer_error", "normalization_shift") if key in st and st[key] is not None]
        lines.append(f"stage {name}: " + ", ".join(bits))
    return "\n".join(lines)
