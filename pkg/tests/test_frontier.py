import io
import math

import pytest

from randmatch import RandomDiscreteSpec, generate_random_discrete
from randmatch.frontier import COLUMNS, read_frontier_csv, run_frontier, thread_count


def test_fig1_single_level(fig1):
    rows = run_frontier(fig1, [1.0], ["plra", "pm-q"])
    assert [r["algorithm"] for r in rows] == ["plra", "pm-q"]
    for r in rows:
        assert r["error"] is None
        assert r["quality"] == pytest.approx(5, abs=1e-8)
    assert rows[1]["entropy"] >= rows[0]["entropy"]
    assert rows[1]["entropy"] == pytest.approx(3 * math.log(3) + 2 * math.log(2), abs=1e-6)


def test_empty_grid(fig1):
    buf = io.StringIO()
    assert run_frontier(fig1, [], out=buf) == []
    assert buf.getvalue().strip() == ",".join(COLUMNS)


def test_random_discrete_support():
    inst = generate_random_discrete(10, 8, RandomDiscreteSpec((0.25, 0.5, 1.0), seed=3), 1, 3)
    rows = run_frontier(inst, [0.8], ["plra", "pm-q"])
    plra, pmq = rows
    assert pmq["support"] >= plra["support"]


def test_threads_do_not_change_rows(fig1, tmp_path, monkeypatch):
    serial = run_frontier(fig1, [0.9, 1.0], ["plra", "pm-q", "pm-e"], threads=1)
    parallel = run_frontier(fig1, [0.9, 1.0], ["plra", "pm-q", "pm-e"], threads=3)
    assert serial == parallel
    path = tmp_path / "f.csv"
    run_frontier(fig1, [1.0], out=str(path))
    assert [r["algorithm"] for r in read_frontier_csv(path)] == ["plra", "pm-q"]
    monkeypatch.setenv("RANDMATCH_THREADS", "4")
    assert thread_count() == 4


def test_errors_are_per_row(fig1):
    with pytest.raises(ValueError):
        run_frontier(fig1, [1.5])
    with pytest.raises(ValueError):
        run_frontier(fig1, [1.0], ["gurobi"])
