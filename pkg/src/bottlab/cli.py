"""
Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 numerical non-convergence.  All
JSON is written only after the computation succeeded, with sorted keys, so
equal inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import centriole, classifier, clifford, pathflow
from .errors import BranchError, InvalidInput, NonConvergence, ResolutionError

DEFAULT_SEED = 0


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _angle_list(text):
    try:
        return [int(a) for a in text.replace(" ", "").split(",") if a]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"angles must be comma-separated integers: {text}") from exc


def _write_json(path, payload):
    text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bottlab-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"malformed JSON in {path}: {exc}") from exc


def _flow_config(args, T=None):
    N = args.path_n
    T = T or args.grid_t
    if N % T and T % N:
        raise InvalidInput(f"--path-n {N} must be a multiple or divisor of the grid size {T}")
    return pathflow.FlowConfig(T=min(T, N) if N < T else T, N=N, tol=args.tol,
                               max_sweeps=args.max_sweeps, seed=args.seed, workers=args.workers)


# -- commands -----------------------------------------------------------------

def cmd_tables(args):
    dims = {k: clifford.irreducible_dim(k) for k in range(17)}
    groups = {k: clifford.group_kind(k) for k in range(16)}
    names = {"Z2": "Z2", "Z": "Z", "Zero": "0"}
    print("k    " + " ".join(f"{k:>4d}" for k in dims))
    print("m_k  " + " ".join(f"{m:>4d}" for m in dims.values()))
    print("A_k  " + " ".join(f"{names[g]:>4s}" for g in groups.values()))
    if args.out:
        _write_json(args.out, {"m_k": [dims[k] for k in dims], "A_k": [groups[k] for k in groups]})
    return 0


def _system_from_args(args):
    if args.in_path:
        return clifford.CliffordSystem.from_dict(_read_json(args.in_path)).check(1e-8)
    if args.k is None:
        raise InvalidInput("--k is required")
    return clifford.build(args.k, args.copies, args.copies_prime)


def cmd_build(args):
    if args.k is None:
        raise InvalidInput("--k is required")
    S = clifford.build(args.k, args.copies, args.copies_prime)
    cls = clifford.class_in_Ak(S) if S.n else clifford.class_from_multiplicities(args.k, 0)
    print(f"k = {S.k}, n = {S.n}, class in A_{S.k}: {cls}")
    if args.out:
        _write_json(args.out, S.to_dict())
    return 0


def cmd_hopf(args):
    S = _system_from_args(args)
    fam = classifier.hopf_clutching(S, pathflow.SphereGrid(S.k, args.grid_t))
    print(f"Hopf map S^{S.k} -> SO({S.n}) on {len(fam.grid)} grid nodes")
    _write_json(args.out, fam.to_dict())
    return 0


def cmd_classify(args):
    if not args.in_path:
        raise InvalidInput("--in is required")
    fam = pathflow.MapFamily.from_dict(_read_json(args.in_path))
    if args.k is not None and args.k != fam.k:
        raise InvalidInput(f"--k {args.k} does not match the family (k = {fam.k})")
    config = _flow_config(args, T=fam.grid.T)
    report = classifier.classify(fam, config=config, max_k=args.max_k)
    print(classifier.split_report(report), file=sys.stderr if args.out is None else sys.stdout)
    _write_json(args.out, report.to_dict())
    return 0


def cmd_flow_demo(args):
    if args.n is None:
        raise InvalidInput("--n is required")
    if args.n % 2:
        raise InvalidInput("--n must be even (-I is in SO(n) only for even n)")
    if args.path_n < 2:
        raise InvalidInput("--path-n must be at least 2")
    path = pathflow.random_path(args.n, args.path_n, seed=args.seed)
    res = pathflow.shorten(path, args.tol, args.max_sweeps)
    E = res.energies
    print(f"n = {args.n}, N = {args.path_n}: {res.sweeps} sweeps, "
          f"energy {E[0]:.6f} -> {E[-1]:.6f} (minimal {np.pi ** 2 * args.n:.6f})")
    print("angles: " + ", ".join(f"{a:.6f}" for a in res.angles))
    if args.out:
        payload = res.summary()
        payload["energies"] = [float(e) for e in E]
        payload.update({"n": args.n, "N": args.path_n, "seed": args.seed})
        _write_json(args.out, payload)
    return 0


def cmd_index(args):
    angles = args.angles
    if not angles:
        raise InvalidInput("give the angles, e.g. 3,1,1,1")
    k = args.k if args.k is not None else 0
    case_two = centriole.is_case_two(k)
    c = args.c if args.c is not None else (sum(angles) if case_two else None)
    bound = centriole.index_lower_bound(angles, k, c)
    print(f"k = {k} ({'Case 2' if case_two else 'Case 1'}), angles {angles}: "
          f"index lower bound {bound}")
    payload = {"k": k, "angles": angles, "c": c, "bound": bound, "corner": None}
    if bound > 0:
        use = angles if case_two else [abs(a) for a in angles]
        geo, ctx = centriole.synthetic_geodesic(use, k)
        split = centriole.split_modules(geo.velocity, ctx, seed=args.seed)
        best = None
        for j in range(split.r):
            for h in range(j + 1, split.r):
                b = abs((split.angles[j] - split.angles[h]) if split.case_two
                        else (split.angles[j] + split.angles[h])) / 2
                if b >= 2 and (best is None or b > best[0]):
                    best = (b, j, h)
        cut = centriole.cut_corner(geo, best[1:], split, ctx, seed=args.seed)
        print(f"corner at t = 1/{cut.b}: geodesic energy {cut.energy_geodesic:.6f}, "
              f"cut path energy {cut.energy_cut:.6f}")
        payload["corner"] = {"pair": list(best[1:]), "b": cut.b,
                             "energy_geodesic": cut.energy_geodesic,
                             "energy_cut": cut.energy_cut}
    if args.out:
        _write_json(args.out, payload)
    return 0


def cmd_verify(args):
    from .verify import run_checks
    results = run_checks(seed=args.seed)
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    failed = [name for name, ok, _ in results if not ok]
    if args.out:
        _write_json(args.out, {name: {"pass": ok, "detail": detail}
                               for name, ok, detail in results})
    return 0 if not failed else 2


COMMANDS = {
    "tables": (cmd_tables, "print m_k and the groups A_k"),
    "build": (cmd_build, "build a direct sum of irreducible Clifford modules"),
    "hopf": (cmd_hopf, "sample the Hopf clutching map of a Clifford module"),
    "classify": (cmd_classify, "classify a sampled clutching map"),
    "flow-demo": (cmd_flow_demo, "shorten a random path from I to -I"),
    "index": (cmd_index, "index lower bound and a cut-corner demonstration"),
    "verify": (cmd_verify, "run the invariant checks"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="bottlab", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--k", type=_nonneg_int)
        p.add_argument("--n", type=_positive_int)
        p.add_argument("--copies", type=_nonneg_int, default=1)
        p.add_argument("--copies-prime", type=_nonneg_int, default=0)
        p.add_argument("--grid-t", type=_positive_int, default=64)
        p.add_argument("--path-n", type=_positive_int, default=64)
        p.add_argument("--tol", type=_positive_float, default=1e-9)
        p.add_argument("--max-sweeps", type=_positive_int, default=2000)
        p.add_argument("--seed", type=_nonneg_int, default=DEFAULT_SEED)
        p.add_argument("--workers", type=_positive_int, default=1)
        p.add_argument("--in", dest="in_path")
        p.add_argument("--out")
        if name == "index":
            p.add_argument("angles", type=_angle_list, help="comma-separated odd angles")
            p.add_argument("--c", type=int, help="fixed degree sum(a_j) in Case 2")
        if name == "classify":
            p.add_argument("--max-k", type=_positive_int, default=classifier.DEFAULT_MAX_K)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    handler = COMMANDS[args.command][0]
    try:
        return handler(args)
    except (InvalidInput, BranchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NonConvergence, ResolutionError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
