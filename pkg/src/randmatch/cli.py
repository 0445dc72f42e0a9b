"""Command-line interface.

    randmatch solve     --sim S.csv --lp 1 --lr 1 -Q 0.5 --perturb quad:0.25 --out run.json
    randmatch tune      --sim S.csv --lp 1 --lr 1 --floor 0.95 --algorithm pm-q
    randmatch sample    --sim S.csv --lp 1 --lr 1 --assignment run.json --seed 7
    randmatch decompose --sim S.csv --lp 1 --lr 1 --assignment run.json
    randmatch metrics   --sim S.csv --lp 1 --lr 1 --assignment run.json
    randmatch frontier  --sim S.csv --lp 1 --lr 1 --algorithms plra pm-q --out frontier.csv
    randmatch generate  discrete --papers 20 --reviewers 30 --seed 3 --out S.csv

Exit status: 0 on success, 1 when the problem has no acceptable answer
(infeasible loads, unreachable quality floor, ...), 2 for usage and input
errors. Diagnostics go to stderr.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, FloorUnachievable, InvalidParameter, RandMatchError, UsageError
from .frontier import ALGORITHMS, PAPER_GRID, run_frontier, thread_count, write_frontier_csv
from .instance import (
    BlockwiseSpec,
    ProblemInstance,
    RandomDiscreteSpec,
    example1_instance,
    figure1_instance,
    generate_blockwise,
    generate_random_discrete,
)
from .io import (
    RunReport,
    load_assignment,
    load_bids,
    load_similarity_csv,
    parse_level_map,
    write_matrix_csv,
)
from .metrics import compute_metrics
from .perturbation import make_perturbation
from .sampling import decompose, sample_indices
from .solvers import (
    SolverConfig,
    max_quality,
    solve_balanced_greedy,
    solve_greedy,
    solve_pm_exact,
    solve_pm_flow,
    solve_plra,
)
from .tuning import TuningConfig, find_q_plra, tune_pm_exponential, tune_pm_quadratic

SOLVERS = ("plra", "pm-flow", "pm-exact", "greedy", "balanced-greedy")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _add_instance(p, loads=True):
    src = p.add_argument_group("instance")
    src.add_argument("--sim", help="similarity CSV (header of reviewer IDs, then paper rows)")
    src.add_argument("--bids", help="bid CSV of paper,reviewer,level triples")
    src.add_argument("--levels", help="bid level map, e.g. yes=1,maybe=0.5,no=0.25,conflict=0")
    src.add_argument("--config", help="JSON file supplying defaults for any option (e.g. lp, lr)")
    if loads:
        src.add_argument("--lp", type=int, help="reviewers per paper")
        src.add_argument("--lr", type=int, help="maximum papers per reviewer")


def _add_solver(p):
    g = p.add_argument_group("solver")
    g.add_argument("-Q", "--cap", dest="Q", help="probability cap, decimal or ratio (default 1)")
    g.add_argument("--perturb", help="perturbation: linear, quad:B, exp:A, tq:L, te:L (default linear)")
    g.add_argument("--algorithm", choices=SOLVERS, help="default: plra for linear, pm-flow if --w given, else pm-exact")
    g.add_argument("--w", type=int, help="grid precision of the flow approximation")
    g.add_argument("--tol", type=float, help="relative duality-gap tolerance (default 1e-9)")
    g.add_argument("--max-iters", type=int, help="conditional-gradient iteration limit")


def build_parser():
    ap = _Parser(prog="randmatch", description="Randomized reviewer-paper assignment.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="compute a fractional assignment")
    _add_instance(p)
    _add_solver(p)
    p.add_argument("--out", help="write the JSON run report here (default stdout)")
    p.add_argument("--matrix-out", help="also write the assignment as CSV")

    p = sub.add_parser("tune", help="pick Q and the perturbation strength for a quality floor")
    _add_instance(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--floor", type=float, help="quality floor as a fraction of the maximum quality (default 1)")
    g.add_argument("--floor-abs", type=float, help="quality floor as an absolute quality")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="pm-q")
    p.add_argument("--delta", type=float, help="slack added to the PLRA cap (default 0.02)")
    p.add_argument("--search-tol", type=float, help="grid resolution for Q and beta (default 1e-3)")
    p.add_argument("--alpha-max", type=float, help="upper end of the alpha search (default 64)")
    p.add_argument("--tol", type=float, help="solver duality-gap tolerance (default 1e-9)")
    p.add_argument("--out", help="write the JSON report here (default stdout)")

    for name, text in (("sample", "draw one deterministic assignment"), ("decompose", "write x as a lottery")):
        p = sub.add_parser(name, help=text)
        _add_instance(p)
        _add_solver(p)
        p.add_argument("--assignment", help="fractional assignment (run report .json or matrix CSV); solved if absent")
        if name == "sample":
            p.add_argument("--seed", type=int, required=True, help="random seed (required)")
            p.add_argument("--draws", type=int, default=1, help="number of independent draws (default 1)")
        p.add_argument("--out", help="write the JSON report here (default stdout)")

    p = sub.add_parser("metrics", help="quality and randomness metrics of an assignment")
    _add_instance(p)
    p.add_argument("--assignment", required=True, help="run report .json or matrix CSV")
    p.add_argument("--perturb", help="also report the perturbed quality under this perturbation")
    p.add_argument("--out", help="write the JSON report here (default stdout)")

    p = sub.add_parser("frontier", help="quality-vs-randomness table across quality levels")
    _add_instance(p)
    p.add_argument("--eta", type=float, nargs="*", help="quality levels (fractions of max quality); default paper grid")
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS, default=["plra", "pm-q"])
    p.add_argument("--delta", type=float, help="slack added to the PLRA cap (default 0.02)")
    p.add_argument("--search-tol", type=float, help="grid resolution for Q and beta (default 1e-3)")
    p.add_argument("--tol", type=float, help="solver duality-gap tolerance (default 1e-9)")
    p.add_argument("--out", help="write the CSV here (default stdout)")

    p = sub.add_parser("generate", help="write a synthetic similarity CSV")
    p.add_argument("kind", choices=("discrete", "uniform", "blockwise", "figure1", "example1"))
    p.add_argument("--papers", type=int, default=20)
    p.add_argument("--reviewers", type=int, default=30)
    p.add_argument("--levels", default="0.25,0.5,1", help="levels for 'discrete' (increasing)")
    p.add_argument("--paper-sizes", default="3,2", help="block sizes for 'blockwise'")
    p.add_argument("--reviewer-sizes", default="3,2", help="block sizes for 'blockwise'")
    p.add_argument("--diag", type=float, default=1.0, help="within-block similarity for 'blockwise'")
    p.add_argument("--off", type=float, default=0.0, help="cross-block similarity for 'blockwise'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default stdout)")
    return ap


# ------------------------------------------------------------------ helpers

def _apply_config(args):
    """Fill options left unset on the command line from --config JSON."""
    path = getattr(args, "config", None)
    if not path:
        return
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a JSON object")
    for key, value in data.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"{path}: unknown option {key!r}")
        if getattr(args, attr) is None:
            setattr(args, attr, value)


def _table(args):
    if bool(args.sim) == bool(args.bids):
        raise UsageError("give exactly one of --sim and --bids")
    if args.sim:
        return load_similarity_csv(args.sim)
    level_map = parse_level_map(args.levels) if args.levels else None
    return load_bids(args.bids, level_map)


def _instance(args):
    table = _table(args)
    if args.lp is None or args.lr is None:
        raise UsageError("--lp and --lr are required (on the command line or via --config)")
    inst = ProblemInstance(table.S, args.lp, args.lr)
    inst.require_valid()
    return inst, table


def _instance_echo(args, inst):
    return {
        "source": args.sim or args.bids,
        "format": "similarity" if args.sim else "bids",
        "n_p": inst.n_p,
        "n_r": inst.n_r,
        "l_p": inst.l_p,
        "l_r": inst.l_r,
        "total_similarity": inst.total_similarity,
    }


def _solver_config(args):
    kwargs = {}
    if args.Q is not None:
        kwargs["Q"] = str(args.Q)
    if args.perturb is not None:
        kwargs["f"] = args.perturb
    if args.w is not None:
        kwargs["w"] = args.w
    if args.tol is not None:
        kwargs["tol"] = args.tol
    if args.max_iters is not None:
        kwargs["max_iters"] = args.max_iters
    return SolverConfig(**kwargs)


def _algorithm(args, cfg):
    if args.algorithm:
        return args.algorithm
    if cfg.f.is_linear:
        return "plra"
    return "pm-flow" if args.w is not None else "pm-exact"


def _solve(args, inst):
    cfg = _solver_config(args)
    algo = _algorithm(args, cfg)
    if algo == "plra":
        x = solve_plra(inst, cfg.Q)
    elif algo == "pm-flow":
        x = solve_pm_flow(inst, cfg)
    elif algo == "pm-exact":
        x = solve_pm_exact(inst, cfg)
    else:
        fn = solve_greedy if algo == "greedy" else solve_balanced_greedy
        x = fn(inst, cfg.Q)
        if not x:
            raise DomainError(f"{algo} overloads a reviewer: {x.reason}")
    config = {"algorithm": algo, **cfg.echo()}
    return x, cfg, config


def _emit(text, out):
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _base_config(args):
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ------------------------------------------------------------------ commands

def cmd_solve(args):
    inst, table = _instance(args)
    x, cfg, config = _solve(args, inst)
    report = RunReport(
        command="solve",
        config={**_base_config(args), "resolved": config, "version": __version__},
        instance=_instance_echo(args, inst),
        assignment=x.x,
        metrics=compute_metrics(x, inst, f=cfg.f).as_dict(),
        diagnostics=dict(x.info),
        extra={"papers": table.papers, "reviewers": table.reviewers},
    )
    if args.matrix_out:
        write_matrix_csv(args.matrix_out, x.x, table.papers, table.reviewers)
    _emit(report.dumps(), args.out)
    return 0


def _tuning_config(args, M):
    kwargs = {}
    for name in ("delta", "search_tol", "alpha_max"):
        if getattr(args, name, None) is not None:
            kwargs[name] = getattr(args, name)
    if getattr(args, "tol", None) is not None:
        kwargs["solver_tol"] = args.tol
    if getattr(args, "floor_abs", None) is not None:
        kwargs["floor"] = args.floor_abs
    elif getattr(args, "floor", None) is not None:
        if args.floor < 0:
            raise InvalidParameter(f"--floor must be >= 0, got {args.floor}")
        kwargs["floor"] = args.floor * M
    return TuningConfig(**kwargs)


def cmd_tune(args):
    inst, _ = _instance(args)
    t0 = time.perf_counter()
    M = max_quality(inst)
    cfg = _tuning_config(args, M)
    floor, _ = cfg.resolve_floor(inst)
    if floor > M and not np.isclose(floor, M, rtol=1e-9, atol=1e-9):
        raise FloorUnachievable(f"floor exceeds maximum quality ({floor:.12g} > {M:.12g})")
    if args.algorithm == "plra":
        Q = find_q_plra(inst, floor, cfg.search_tol, M=M)
        result = {"Q": str(Q), "param": None, "quality": float(solve_plra(inst, Q).info["quality_exact"])}
    else:
        tune = tune_pm_quadratic if args.algorithm == "pm-q" else tune_pm_exponential
        r = tune(inst, cfg)
        result = {"Q": str(r.Q), "param": r.param, "quality": r.quality, "q_plra": str(r.q_plra), "probes": r.probes}
    report = RunReport(
        command="tune",
        config={**_base_config(args), "tuning": cfg.echo(), "version": __version__},
        instance=_instance_echo(args, inst),
        diagnostics={"wall_time": time.perf_counter() - t0},
        extra={"algorithm": args.algorithm, "floor": floor, "max_quality": M, **result},
    )
    _emit(report.dumps(), args.out)
    return 0


def _assignment(args, inst):
    if args.assignment:
        x = load_assignment(args.assignment)
        return x, {"assignment": args.assignment}
    xa, _, config = _solve(args, inst)
    return xa.x, config


def _component_json(comp, table):
    return [[table.papers[p], table.reviewers[r]] for p, r in comp.pairs()]


def cmd_decompose(args):
    inst, table = _instance(args)
    x, config = _assignment(args, inst)
    dist = decompose(x, inst)
    comps = [
        {"weight": g, "weight_exact": None if dist.exact_weights is None else str(dist.exact_weights[i]),
         "pairs": _component_json(c, table)}
        for i, (c, g) in enumerate(dist.components)
    ]
    report = RunReport(
        command="decompose",
        config={**_base_config(args), "resolved": config, "version": __version__},
        instance=_instance_echo(args, inst),
        assignment=x,
        diagnostics={"components": len(dist), "reconstruction_error": float(np.abs(dist.marginals() - x).max())},
        extra={"components": comps},
    )
    _emit(report.dumps(), args.out)
    return 0


def cmd_sample(args):
    inst, table = _instance(args)
    if args.draws < 1:
        raise InvalidParameter("--draws must be >= 1")
    x, config = _assignment(args, inst)
    dist = decompose(x, inst)
    idx = sample_indices(dist, args.draws, args.seed)
    first = dist.components[int(idx[0])][0]
    counts = np.bincount(idx, minlength=len(dist))
    report = RunReport(
        command="sample",
        config={**_base_config(args), "resolved": config, "version": __version__},
        instance=_instance_echo(args, inst),
        assignment=first.X.astype(float),
        diagnostics={"components": len(dist), "weights": dist.weights},
        extra={
            "seed": args.seed,
            "component": int(idx[0]),
            "pairs": _component_json(first, table),
            "counts": counts if args.draws > 1 else None,
        },
    )
    _emit(report.dumps(), args.out)
    return 0


def cmd_metrics(args):
    inst, _ = _instance(args)
    x = load_assignment(args.assignment)
    f = make_perturbation(args.perturb) if args.perturb else None
    report = RunReport(
        command="metrics",
        config={**_base_config(args), "version": __version__},
        instance=_instance_echo(args, inst),
        metrics=compute_metrics(x, inst, f=f).as_dict(),
    )
    _emit(report.dumps(), args.out)
    return 0


def cmd_frontier(args):
    inst, _ = _instance(args)
    grid = PAPER_GRID if args.eta is None else args.eta
    cfg = _tuning_config(args, None)
    out = args.out
    rows = run_frontier(inst, grid, args.algorithms, out=out, tuning=cfg, threads=thread_count())
    if out is None:
        write_frontier_csv(sys.stdout, rows)
    failed = [r for r in rows if r["error"]]
    for r in failed:
        print(f"randmatch: eta={r['eta']} {r['algorithm']}: {r['error']}", file=sys.stderr)
    return 0


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def cmd_generate(args):
    if args.kind == "figure1":
        S = figure1_instance().S
    elif args.kind == "example1":
        S = example1_instance().S
    elif args.kind == "discrete":
        try:
            levels = tuple(float(v) for v in args.levels.split(","))
        except ValueError:
            raise UsageError(f"bad --levels {args.levels!r}") from None
        S = generate_random_discrete(args.papers, args.reviewers, RandomDiscreteSpec(levels, args.seed)).S
    elif args.kind == "uniform":
        S = np.random.default_rng(args.seed).random((args.papers, args.reviewers))
    else:
        ps, rs = _int_list(args.paper_sizes), _int_list(args.reviewer_sizes)
        if len(ps) != len(rs):
            raise UsageError("--paper-sizes and --reviewer-sizes need the same number of blocks")
        k = len(ps)
        A = np.full((k, k), args.off) + (args.diag - args.off) * np.eye(k)
        S = generate_blockwise(BlockwiseSpec(A, ps, rs), 1, 1).S
    write_matrix_csv(args.out or sys.stdout, S)
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "tune": cmd_tune,
    "sample": cmd_sample,
    "decompose": cmd_decompose,
    "metrics": cmd_metrics,
    "frontier": cmd_frontier,
    "generate": cmd_generate,
}


def cli_main(argv=None):
    """Run the CLI and return its exit status instead of exiting."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"randmatch: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"randmatch: error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"randmatch: {exc}", file=sys.stderr)
        return 1
    except RandMatchError as exc:
        print(f"randmatch: internal error: {exc}", file=sys.stderr)
        return 1


def main():
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
