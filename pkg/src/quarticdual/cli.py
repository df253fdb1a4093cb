"""Command-line front end: ``quarticdual <command> [options]``.

Exit codes: 0 success, 2 usage or input error, 3 numerical non-convergence.
Output files without an explicit directory go to ``$QUARTICDUAL_OUT`` when
that variable is set.
"""
import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import optimize

from . import __version__
from .conjugate import gaussian_dual, gaussian_dual_solve, gaussian_primal
from .exceptions import DomainError, FormatError, GenerationError
from .export import build_dual_qp, build_dual_qq, import_multiplier, write_sdpa
from .instgen import Family, generate
from .problems import QpInstance, load_instance, save_instance
from .solver import SolverConfig, write_trace_csv, solve_qp, solve_qq
from .verify import certify_qp, certify_qq, dual_kkt_qq, recover_x

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3
OUT_ENV = "QUARTICDUAL_OUT"

BENCH_COLUMNS = (
    "n", "cond", "family", "seed", "status", "iterations", "gap", "dual_kkt",
    "wall_time_seconds",
)


class UsageError(Exception):
    pass


def _out_path(path):
    """Resolve a bare file name against ``$QUARTICDUAL_OUT``."""
    base = os.environ.get(OUT_ENV)
    if path and base and not os.path.isabs(path) and os.path.dirname(path) == "":
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _family(text):
    try:
        return Family.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_config_flags(p):
    g = p.add_argument_group("solver parameters")
    g.add_argument("--epsilon", type=float, default=1e-4, help="stopping tolerance on ||Gamma||")
    g.add_argument("--eta", type=float, default=1e-6, help="Armijo slope factor")
    g.add_argument("--rho", type=float, default=None, help="potential weight (default 2(n+1) or 2(n+3))")
    g.add_argument("--memory", type=int, default=None, help="non-monotone window (default 5 or 10)")
    g.add_argument("--beta-centering", type=float, default=0.2, dest="beta", help="centering parameter")
    g.add_argument("--max-iter", type=int, default=500)


def _config(args, keep_trace=False):
    try:
        return SolverConfig(
            epsilon=args.epsilon, eta=args.eta, rho=args.rho, memory=args.memory,
            beta=args.beta, max_iter=args.max_iter, keep_trace=keep_trace,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit(obj):
    json.dump(obj, sys.stdout, indent=1, default=_json_default)
    sys.stdout.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _solve(inst, cfg):
    if isinstance(inst, QpInstance):
        state, report = solve_qp(inst, cfg)
        cert = certify_qp(inst, state.x, state.sigma)
        lam = None
    else:
        state, report = solve_qq(inst, cfg)
        cert = certify_qq(inst, state.x, state.lam, state.sigma)
        lam = state.lam
    return state, report, cert, lam


# -- commands ------------------------------------------------------------------


def cmd_gen(args):
    try:
        inst = generate(args.n, args.cond, args.family, args.seed)
    except (ValueError, GenerationError) as exc:
        raise UsageError(str(exc)) from None
    out = _out_path(args.out or f"{args.family.value}_n{args.n}_c{args.cond:g}_s{args.seed}.json")
    save_instance(inst, out)
    print(out)
    return EXIT_OK


def cmd_solve(args):
    inst = load_instance(args.instance)
    cfg = _config(args, keep_trace=bool(args.trace))
    state, report, cert, lam = _solve(inst, cfg)
    doc = {
        "report": report.as_dict(),
        "certificate": cert.as_dict(),
        "solution": {"x": state.x, "sigma": state.sigma, "lambda": lam},
    }
    _emit(doc)
    if args.trace:
        write_trace_csv(report, _out_path(args.trace))
    if args.out:
        with open(_out_path(args.out), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, default=_json_default)
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def _read_solution(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, line=exc.lineno, column=exc.colno) from None
    sol = doc.get("solution", doc)
    try:
        return np.asarray(sol["x"], dtype=float), float(sol["sigma"]), sol.get("lambda")
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"solution document is malformed: {exc}") from None


def cmd_verify(args):
    inst = load_instance(args.instance)
    x, sigma, lam = _read_solution(args.solution)
    if x.shape != (inst.n,):
        raise UsageError(f"solution has dimension {x.size}, instance has {inst.n}")
    if isinstance(inst, QpInstance):
        cert = certify_qp(inst, x, sigma)
    else:
        if lam is None:
            raise UsageError("constrained instance needs a 'lambda' in the solution")
        cert = certify_qq(inst, x, float(lam), sigma)
    _emit(cert.as_dict())
    tol = args.tol
    ok = (
        abs(cert.gap) <= tol
        and cert.fenchel_residual <= tol
        and cert.primal_feasibility <= tol
        and cert.complementarity <= tol
        and cert.dual_cone_margin >= -tol
    )
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_export(args):
    inst = load_instance(args.instance)
    problem = build_dual_qp(inst) if isinstance(inst, QpInstance) else build_dual_qq(inst)
    out = _out_path(args.out or os.path.splitext(os.path.basename(args.instance))[0] + ".dat-s")
    write_sdpa(problem, out)
    print(out)
    return EXIT_OK


def cmd_recover(args):
    Z = import_multiplier(args.multiplier)
    x, ok = recover_x(Z)
    _emit({"x": x, "rank_one": ok})
    return EXIT_OK if ok else EXIT_NONCONVERGED


def _bench_one(job):
    n, cond, family, seed, cfg = job
    inst = generate(n, cond, family, seed)
    state, report, cert, lam = _solve(inst, cfg)
    kkt = dual_kkt_qq(inst, state.x, lam, state.sigma) if lam is not None else ""
    return {
        "n": n, "cond": cond, "family": family.value, "seed": seed,
        "status": report.status.value, "iterations": report.iterations,
        "gap": report.gap, "dual_kkt": kkt, "wall_time_seconds": report.wall_time,
    }


def run_bench(family, ns, conds, seeds, cfg, jobs=1):
    """Benchmark rows in (n, cond, seed) order, whatever the scheduling."""
    todo = [(n, c, family, s, cfg) for n in ns for c in conds for s in range(seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_bench_one, todo))
    return [_bench_one(job) for job in todo]


def bench_summary(rows):
    """Per-cell means of |gap|, iterations and time, as ``(key, dict)`` pairs."""
    cells = {}
    for r in rows:
        cells.setdefault((r["n"], r["cond"]), []).append(r)
    out = []
    for key, rs in cells.items():
        out.append((key, {
            "mean_abs_gap": float(np.mean([abs(r["gap"]) for r in rs])),
            "mean_iterations": float(np.mean([r["iterations"] for r in rs])),
            "mean_time": float(np.mean([r["wall_time_seconds"] for r in rs])),
            "converged": sum(r["status"] == "converged" for r in rs),
            "runs": len(rs),
        }))
    return out


def cmd_bench(args):
    cfg = _config(args)
    rows = run_bench(args.family, args.n, args.cond, args.seeds, cfg, args.jobs)
    out = _out_path(args.out or f"bench_{args.family.value}.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    for (n, cond), s in bench_summary(rows):
        print(
            f"summary n={n} cond={cond:g} converged={s['converged']}/{s['runs']} "
            f"mean_abs_gap={s['mean_abs_gap']:.3e} mean_iterations={s['mean_iterations']:.1f} "
            f"mean_time={s['mean_time']:.3f}s"
        )
    return EXIT_OK


def maximize_gaussian_dual(beta):
    """Numerical maximum of the Gaussian dual over ``[-beta, 0]``.

    A bounded Brent search locates the maximizer; when the derivative
    ``log(-s)`` changes sign on the interval the point is then polished by a
    root solve, otherwise the search is compared with the endpoint ``-beta``
    (the concave dual peaks on the boundary for ``beta <= 1``).
    """
    res = optimize.minimize_scalar(
        lambda s: -gaussian_dual(s), bounds=(-beta, 0.0), method="bounded",
        options={"xatol": 1e-12},
    )
    if beta > 1.0:
        # Interior stationary point of a concave function: the maximizer.
        sigma = optimize.brentq(lambda s: math.log(-s), -beta, -1e-12, xtol=1e-15)
        return sigma, float(gaussian_dual(sigma))
    value, sigma = max((float(gaussian_dual(s)), s) for s in (float(res.x), -beta))
    return sigma, value


def cmd_demo_gaussian(args):
    beta = args.beta
    if not (math.isfinite(beta) and beta > 0):
        raise UsageError("beta must be positive")
    exact = gaussian_dual_solve(beta)
    sigma_num, value_num = maximize_gaussian_dual(beta)
    print(f"beta {beta!r}")
    print(f"sigma_star_closed_form {exact.sigma_star!r}")
    print(f"value_closed_form {exact.g_star!r}")
    print(f"sigma_star_numeric {sigma_num!r}")
    print(f"value_numeric {value_num!r}")
    print("x_star " + " ".join(repr(float(v)) for v in exact.x_star))
    if args.out:
        base = _out_path(args.out)
        os.makedirs(base, exist_ok=True)
        k = args.samples
        sig = np.linspace(-max(beta, 1.0) * 1.5, 0.0, k)
        with open(os.path.join(base, "gaussian_dual.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sigma", "g", "feasible"])
            for s in sig:
                w.writerow([repr(float(s)), repr(float(gaussian_dual(s))), int(s >= -beta)])
        xs = np.linspace(-3.0, 3.0, k)
        with open(os.path.join(base, "gaussian_primal.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "f"])
            for x in xs:
                w.writerow([repr(float(x)), repr(float(gaussian_primal(x, beta)))])
        print(f"tables {base}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="quarticdual", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a seeded random instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--cond", type=float, default=10.0)
    p.add_argument("--family", type=_family, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve an instance file")
    p.add_argument("instance")
    _add_config_flags(p)
    p.add_argument("--trace", help="write the per-iteration trace CSV here")
    p.add_argument("--out", help="also write the JSON result here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="certify a solution of an instance")
    p.add_argument("instance")
    p.add_argument("solution", help="JSON with x, sigma and (constrained) lambda")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="write the dual as an SDPA sparse file")
    p.add_argument("instance")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("recover", help="recover x from a multiplier matrix file")
    p.add_argument("multiplier")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("bench", help="benchmark a grid of seeded instances")
    p.add_argument("--family", type=_family, required=True)
    p.add_argument("--n", type=_int_list, required=True, help="comma-separated sizes")
    p.add_argument("--cond", type=_float_list, default=[10.0], help="comma-separated condition numbers")
    p.add_argument("--seeds", type=int, default=10, help="seeds 0..k-1 per cell")
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("demo-gaussian", help="closed-form versus numerical Gaussian dual")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--out", help="directory for the plot-ready tables")
    p.set_defaults(func=cmd_demo_gaussian)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FormatError, DomainError, OSError, ValueError, TypeError) as exc:
        print(f"quarticdual {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
