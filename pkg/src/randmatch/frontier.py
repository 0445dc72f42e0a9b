"""Quality-versus-randomness frontier tables.

For each quality level eta (a fraction of the maximum quality M) every
requested algorithm is tuned to the floor eta * M, solved, and measured.
The rows are plot data; nothing here draws figures.
"""

import csv
import os
from concurrent.futures import ThreadPoolExecutor

from .errors import RandMatchError
from .io import format_float, open_text
from .metrics import compute_metrics
from .solvers import SolverConfig, max_quality, solve_pm_exact, solve_plra
from .tuning import TuningConfig, find_q_plra, tune_pm_exponential, tune_pm_quadratic

PAPER_GRID = (0.8, 0.85, 0.9, 0.95, 0.98, 0.99, 0.995, 1.0)
ALGORITHMS = ("plra", "pm-q", "pm-e")
COLUMNS = ("eta", "algorithm", "Q", "param", "quality", "maxprob", "avgmaxp", "support", "entropy", "l2norm", "error")


def thread_count(default=1):
    """Worker count from RANDMATCH_THREADS (at least 1)."""
    raw = os.environ.get("RANDMATCH_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def _row(eta, algorithm, inst, M, tuning):
    row = {"eta": eta, "algorithm": algorithm, "Q": None, "param": None, "error": None}
    try:
        cfg = TuningConfig(
            floor=eta * M,
            delta=tuning.delta,
            search_tol=tuning.search_tol,
            beta_max=tuning.beta_max,
            alpha_max=tuning.alpha_max,
            alpha_steps=tuning.alpha_steps,
            alpha_scan=tuning.alpha_scan,
            solver_tol=tuning.solver_tol,
        )
        if algorithm == "plra":
            Q = find_q_plra(inst, cfg.floor, cfg.search_tol, M=M)
            x = solve_plra(inst, Q)
            param = None
        elif algorithm == "pm-q":
            Q, param = tune_pm_quadratic(inst, cfg)
            x = solve_pm_exact(inst, SolverConfig(Q=Q, f=f"quad:{param!r}", tol=cfg.solver_tol))
        elif algorithm == "pm-e":
            Q, param = tune_pm_exponential(inst, cfg)
            x = solve_pm_exact(inst, SolverConfig(Q=Q, f=f"exp:{param!r}", tol=cfg.solver_tol))
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        row["Q"] = str(Q)
        row["param"] = param
        row.update(compute_metrics(x, inst).as_dict())
        row.pop("pquality", None)
        row.pop("support_tol", None)
    except RandMatchError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_frontier(inst, quality_grid=PAPER_GRID, algorithms=("plra", "pm-q"), out=None, tuning=None, threads=None):
    """Tune, solve and measure every (eta, algorithm) pair.

    Returns rows (dicts keyed by ``COLUMNS``) sorted by eta and then by the
    position of the algorithm in ``algorithms``. A failing pair yields a
    row whose ``error`` names the exception; the others still run. When
    ``out`` is given the table is also written there as CSV.
    """
    grid = [float(e) for e in quality_grid]
    for e in grid:
        if not 0 < e <= 1:
            raise ValueError(f"quality levels must lie in (0, 1], got {e}")
    algorithms = list(algorithms)
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
    tuning = tuning or TuningConfig()
    rows = []
    if grid and algorithms:
        M = max_quality(inst)
        jobs = [(e, a) for e in grid for a in algorithms]
        workers = threads or thread_count()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(lambda job: _row(job[0], job[1], inst, M, tuning), jobs))
        else:
            rows = [_row(e, a, inst, M, tuning) for e, a in jobs]
    order = {a: i for i, a in enumerate(algorithms)}
    rows.sort(key=lambda r: (r["eta"], order[r["algorithm"]]))
    if out is not None:
        write_frontier_csv(out, rows)
    return rows


def write_frontier_csv(path, rows):
    with open_text(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in COLUMNS])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def read_frontier_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
