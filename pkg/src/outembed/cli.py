"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 infeasible parameters,
3 search budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import gc
import io
import json
import math
import sys
import time
from itertools import combinations

import numpy as np

from . import __version__
from .bicriteria import (BicriteriaParams, InfeasibleParameters, bicriteria_euclidean,
                         bicriteria_tree, bicriteria_ultrametric, subdominant_ultrametric)
from .euclidean import outliers_euclidean
from .instances import (parse_graph, planted_instance, random_tree, random_ultrametric,
                        vc_euclidean_instance, vc_tree_instance, vc_ultrametric_instance)
from .metric import (DEFAULT_TOL, DistanceMatrix, all_quads_ok, all_triples_ok, restrict_labels,
                     validate_metric)
from .oracle import BudgetExceeded, OracleBudget, exact_min_outliers, verify_certificate
from .tree import induced_metric, to_newick
from .treefit import outliers_tree_fast, outliers_tree_quartic
from .ultrametric import outliers_ultrametric_cubic, outliers_ultrametric_fast

FORMAT_VERSION = 1
MAX_CLI_DIM = 3

EXIT_OK, EXIT_INPUT, EXIT_PARAMS, EXIT_BUDGET = 0, 1, 2, 3


class InputError(ValueError):
    pass


# input / output -------------------------------------------------------------------

def _num(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise InputError(f"not a number: {s!r}") from None
    if not math.isfinite(v):
        raise InputError(f"non-finite entry {s!r}")
    return v


def _is_num(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _looks_square(header, body) -> bool:
    n = len(header)
    if len(body) != n:
        return False
    for i, r in enumerate(body):
        cells = r[1:] if len(r) == n + 1 else r
        if len(cells) != n or not all(_is_num(c) for c in cells) or float(cells[i]) != 0:
            return False
    return True


def parse_matrix(text: str) -> DistanceMatrix:
    """Read a square CSV (header of labels, optional leading label column)
    or a three-column edge list ``label,label,distance`` covering every
    pair."""
    rows = [[c.strip() for c in r] for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise InputError("empty matrix file")
    header, body = rows[0], rows[1:]
    n = len(header)
    if _looks_square(header, body):
        if len(set(header)) != n:
            raise InputError("duplicate labels")
        D = np.zeros((n, n))
        for i, r in enumerate(body):
            if len(r) == n + 1:
                if r[0] != header[i]:
                    raise InputError(f"row {i + 1} is labelled {r[0]!r}, expected {header[i]!r}")
                r = r[1:]
            D[i] = [_num(c) for c in r]
        if np.any(D < 0):
            raise InputError("negative distance")
        try:
            return DistanceMatrix.from_square(D, header)
        except ValueError as e:
            raise InputError(str(e)) from None
    # edge list
    if any(len(r) != 3 for r in rows):
        bad = next(r for r in rows if len(r) != 3)
        raise InputError(f"ragged row {bad!r}")
    if not _is_num(rows[0][2]):
        rows = rows[1:]
    labels, dist = [], {}
    for a, b, w in rows:
        v = _num(w)
        if v < 0:
            raise InputError(f"negative distance between {a!r} and {b!r}")
        for lab in (a, b):
            if lab not in dist:
                dist[lab] = {}
                labels.append(lab)
        if a == b:
            if v != 0:
                raise InputError(f"nonzero self-distance for {a!r}")
            continue
        for x, y in ((a, b), (b, a)):
            if y in dist[x] and abs(dist[x][y] - v) > DEFAULT_TOL.eta(max(v, dist[x][y])):
                raise InputError(f"conflicting distances for {a!r}, {b!r}")
            dist[x][y] = v
    n = len(labels)
    D = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        a, b = labels[i], labels[j]
        if b not in dist[a]:
            raise InputError(f"missing pair ({a!r}, {b!r})")
        D[i, j] = D[j, i] = dist[a][b]
    try:
        return DistanceMatrix.from_square(D, labels)
    except ValueError as e:
        raise InputError(str(e)) from None


def format_matrix(M: DistanceMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([str(lab) for lab in M.labels])
    for row in M.square():
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def format_coords(labels, coords) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = coords.shape[1] if coords.ndim == 2 else 0
    w.writerow(["label"] + [f"x{i + 1}" for i in range(d)])
    for lab, row in zip(labels, coords):
        w.writerow([str(lab)] + [repr(float(v)) for v in row])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_metric(path: str) -> DistanceMatrix:
    M = parse_matrix(_read(path))
    rep = validate_metric(M)
    if not rep.ok:
        raise InputError(f"triangle inequality fails, e.g. on {rep.violations[0]!r}")
    return M


def _report(args, argv, target, algorithm, result, extra=None) -> dict:
    params = {
        "epsilon": getattr(args, "epsilon", None),
        "d": getattr(args, "dim", None),
        "C_d": getattr(args, "C_d", None),
        "slack_tree_factor": getattr(args, "slack_tree_factor", None),
        "abs_tol": DEFAULT_TOL.abs_tol,
        "rel_tol": DEFAULT_TOL.rel_tol,
        "seed": getattr(args, "seed", None),
    }
    stats = {k: v for k, v in result.stats.items() if k != "algorithm"}
    rep = {
        "format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "command": list(argv),
        "target": target,
        "algorithm": algorithm,
        "parameters": {k: v for k, v in params.items() if v is not None},
        "n": len(result.outliers) + len(result.kept),
        "k": len(result.outliers),
        "outliers": list(result.outliers),
        "kept": list(result.kept),
        "certificate": [v.to_dict() for v in result.certificate],
        "stats": stats,
    }
    if extra:
        rep.update(extra)
    return _jsonable(rep)


def _emit(args, rep: dict, t0: float) -> None:
    if getattr(args, "timing", False):
        rep["runtime_ms"] = (time.perf_counter() - t0) * 1000
    _write(args.output, json.dumps(rep, indent=2) + "\n")


def _check_dim(args) -> None:
    if args.target == "euclidean":
        if args.dim is None:
            raise InfeasibleParameters("--dim is required for the euclidean target")
        if not 1 <= args.dim <= MAX_CLI_DIM:
            raise InfeasibleParameters(f"--dim must lie in 1..{MAX_CLI_DIM}")


def _order(args, n):
    if getattr(args, "seed", None) is None:
        return None
    return np.random.default_rng(args.seed).permutation(n)


# subcommands -------------------------------------------------------------------------

def cmd_validate(args, argv) -> int:
    M = parse_matrix(_read(args.input))
    rep = validate_metric(M)
    out = {
        "format_version": FORMAT_VERSION,
        "command": list(argv),
        "n": M.n,
        "diameter": M.diameter(),
        "metric": rep.to_dict(),
    }
    if rep.ok:
        out["ultrametric"] = all_triples_ok(M)
        out["tree_metric"] = all_quads_ok(M)
    _write(args.output, json.dumps(_jsonable(out), indent=2) + "\n")
    return EXIT_OK if rep.ok else EXIT_INPUT


def cmd_embed(args, argv) -> int:
    t0 = time.perf_counter()
    _check_dim(args)
    M = _load_metric(args.input)
    extra = {}
    if args.target == "ultrametric":
        if args.algorithm == "fast":
            res = outliers_ultrametric_fast(M, order=_order(args, M.n))
        else:
            res = outliers_ultrametric_cubic(M)
        if args.newick and res.kept:
            _write(args.newick, subdominant_ultrametric(restrict_labels(M, res.kept)).to_newick() + "\n")
    elif args.target == "tree":
        if args.algorithm == "fast":
            res, T = outliers_tree_fast(M, order=_order(args, M.n))
        else:
            res = outliers_tree_quartic(M)
            T = outliers_tree_fast(restrict_labels(M, res.kept))[1] if res.kept else None
        if args.newick and res.kept:
            _write(args.newick, to_newick(T) + "\n")
    else:
        res, coords = outliers_euclidean(M, args.dim)
        if args.coords:
            _write(args.coords, format_coords(res.kept, coords))
    extra["certificate_verified"] = verify_certificate(M, res)
    _emit(args, _report(args, argv, args.target, res.stats.get("algorithm"), res, extra), t0)
    return EXIT_OK


def cmd_bicriteria(args, argv) -> int:
    t0 = time.perf_counter()
    _check_dim(args)
    M = _load_metric(args.input)
    params = BicriteriaParams(args.epsilon, d=args.dim, C_d=args.C_d,
                              slack_tree_factor=args.slack_tree_factor,
                              exhaustive=args.exhaustive)
    if args.target == "ultrametric":
        res, U, dist = bicriteria_ultrametric(M, params)
        if args.newick and res.kept:
            _write(args.newick, U.to_newick() + "\n")
    elif args.target == "tree":
        res, T, dist = bicriteria_tree(M, params)
        if args.newick and res.kept:
            _write(args.newick, to_newick(T) + "\n")
    else:
        res, coords = bicriteria_euclidean(M, params)
        dist = res.stats["distortion"]
        if args.coords:
            _write(args.coords, format_coords(res.kept, coords))
    extra = {"distortion": dist, "certificate_verified": verify_certificate(M, res)}
    _emit(args, _report(args, argv, args.target, res.stats.get("algorithm"), res, extra), t0)
    return EXIT_OK


def cmd_exact(args, argv) -> int:
    t0 = time.perf_counter()
    _check_dim(args)
    M = _load_metric(args.input)
    out = exact_min_outliers(M, args.target, OracleBudget(args.max_n, args.max_subset), d=args.dim)
    rep = {
        "format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "command": list(argv),
        "target": args.target,
        "algorithm": "exact-enumeration",
        "parameters": {k: v for k, v in (("d", args.dim), ("max_n", args.max_n)) if v is not None},
        "n": M.n,
        "k": len(out),
        "outliers": out,
    }
    _emit(args, _jsonable(rep), t0)
    return EXIT_OK


def cmd_gen(args, argv) -> int:
    if args.kind == "planted":
        inst = planted_instance(args.target, args.n, args.k, args.epsilon, args.seed, d=args.dim)
        _write(args.output, format_matrix(inst.matrix))
        if args.witness:
            _write(args.witness, "\n".join(str(w) for w in inst.witness) + ("\n" if inst.witness else ""))
        return EXIT_OK
    G = parse_graph(_read(args.graph))
    if args.kind == "vc-tree":
        M = vc_tree_instance(G, args.nu)
    elif args.kind == "vc-ultrametric":
        M = vc_ultrametric_instance(G, args.nu)
    else:
        M = vc_euclidean_instance(G, args.nu, layout=args.layout)
    _write(args.output, format_matrix(M))
    return EXIT_OK


def _batch_time(fn, min_batch: float) -> float:
    calls, t0 = 0, time.perf_counter()
    while True:
        fn()
        calls += 1
        el = time.perf_counter() - t0
        if el >= min_batch:
            return el / calls


def bench(target: str, sizes, repeats: int = 3, seed: int = 0, timing: bool = True,
          min_batch: float = 0.05) -> dict:
    """Run the quadratic algorithm on exact members of growing size.

    Reports the worst per-insertion work constant for every size and,
    with ``timing``, the best per-call wall time and the ratios between
    consecutive sizes. Sizes are timed round-robin ``repeats`` times, each
    sample a batch of calls lasting at least ``min_batch`` seconds, with
    the garbage collector paused; interleaving keeps slow phases of a
    shared machine from landing on a single size.
    """
    rng = np.random.default_rng(seed)
    runs, rows = [], []
    for n in sizes:
        if target == "tree":
            M = induced_metric(random_tree(n, rng))
            run = (lambda M=M: outliers_tree_fast(M)[0])
            ckey = "visits_per_kept_point"
        elif target == "ultrametric":
            M = random_ultrametric(n, rng)
            run = (lambda M=M: outliers_ultrametric_fast(M))
            ckey = "reads_per_kept_point"
        else:
            raise InfeasibleParameters(f"bench supports ultrametric and tree, not {target!r}")
        res = run()
        runs.append(run)
        rows.append({"n": n, "outliers": len(res.outliers), "work_constant": res.stats[ckey]})
    if timing:
        best = [math.inf] * len(sizes)
        gc_was = gc.isenabled()
        gc.disable()
        try:
            for _ in range(repeats):
                for i, run in enumerate(runs):
                    best[i] = min(best[i], _batch_time(run, min_batch))
        finally:
            if gc_was:
                gc.enable()
        for row, t in zip(rows, best):
            row["seconds"] = t
    out = {"target": target, "sizes": list(sizes), "repeats": repeats, "seed": seed, "runs": rows,
           "work_constant": max(r["work_constant"] for r in rows)}
    if timing:
        out["ratios"] = [rows[i + 1]["seconds"] / rows[i]["seconds"] for i in range(len(rows) - 1)]
    return out


def cmd_bench(args, argv) -> int:
    out = bench(args.target, args.sizes, args.repeats, args.seed, timing=args.timing)
    rep = {"format_version": FORMAT_VERSION, "tool_version": __version__, "command": list(argv)}
    rep.update(out)
    _write(args.output, json.dumps(_jsonable(rep), indent=2) + "\n")
    return EXIT_OK


# argument parsing ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="outembed", description="Outlier embeddings of finite metrics.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def io_args(q, need_input=True):
        if need_input:
            q.add_argument("-i", "--input", required=True, help="matrix CSV or edge list ('-' for stdin)")
        q.add_argument("-o", "--output", help="report path (default stdout)")

    def target_args(q):
        q.add_argument("--target", required=True, choices=["ultrametric", "tree", "euclidean"])
        q.add_argument("--dim", type=int, help="dimension for the euclidean target (1..3)")
        q.add_argument("--timing", action="store_true", help="add runtime_ms to the report")

    q = sub.add_parser("validate", help="check the triangle inequality and class membership")
    io_args(q)
    q.set_defaults(func=cmd_validate)

    q = sub.add_parser("embed", help="minimum outlier embedding with isometry")
    io_args(q)
    target_args(q)
    q.add_argument("--algorithm", choices=["fast", "naive"], default="fast")
    q.add_argument("--seed", type=int, help="shuffle the insertion order with this seed")
    q.add_argument("--newick", help="write the fitted tree or dendrogram here")
    q.add_argument("--coords", help="write kept-point coordinates (euclidean) here")
    q.set_defaults(func=cmd_embed)

    q = sub.add_parser("bicriteria", help="few outliers plus small additive distortion")
    io_args(q)
    target_args(q)
    q.add_argument("--epsilon", type=float, required=True)
    q.add_argument("--C-d", dest="C_d", type=float, default=8.0)
    q.add_argument("--slack-tree-factor", type=float, default=4.0)
    q.add_argument("--exhaustive", action="store_true", help="unpruned normalized-sequence search")
    q.add_argument("--newick")
    q.add_argument("--coords")
    q.set_defaults(func=cmd_bicriteria)

    q = sub.add_parser("exact", help="exact minimum outlier set by enumeration")
    io_args(q)
    target_args(q)
    q.add_argument("--max-n", type=int, default=12)
    q.add_argument("--max-subset", type=int)
    q.set_defaults(func=cmd_exact)

    q = sub.add_parser("gen", help="generate instances")
    q.add_argument("kind", choices=["vc-tree", "vc-ultrametric", "vc-euclidean", "planted"])
    q.add_argument("-o", "--output")
    q.add_argument("--graph", help="graph file (vc-* kinds)")
    q.add_argument("--nu", type=float, default=0.1)
    q.add_argument("--layout", choices=["arc", "line"], default="arc")
    q.add_argument("--target", choices=["ultrametric", "tree", "euclidean"], default="tree",
                   help="class of the planted instance")
    q.add_argument("--n", type=int, default=32)
    q.add_argument("--k", type=int, default=2)
    q.add_argument("--epsilon", type=float, default=0.05)
    q.add_argument("--dim", type=int, default=2)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--witness", help="write the planted witness labels here")
    q.set_defaults(func=cmd_gen)

    q = sub.add_parser("bench", help="quadratic-time scaling harness")
    q.add_argument("--target", choices=["ultrametric", "tree"], default="tree")
    q.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024])
    q.add_argument("--repeats", type=int, default=3)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--timing", action="store_true", help="include wall times and ratios")
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_bench)
    return p


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT
    if args.command == "gen" and args.kind != "planted" and not args.graph:
        print("error: --graph is required for vc-* instances", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args, argv)
    except InfeasibleParameters as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARAMS
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (InputError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())
