"""Reading similarity data and writing matrices and run reports.

Similarity CSV: the first row holds reviewer IDs (optionally preceded by a
corner cell), and every further row is a paper ID followed by one decimal
per reviewer.

Bid CSV: ``paper,reviewer,level`` triples, with an optional header row of
exactly those names. Levels map to similarities through ``DEFAULT_LEVELS``
and pairs without a bid get the "no" level.
"""

import csv
import json
import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import NegativeSimilarity, ParseError, UnknownLevel

DEFAULT_LEVELS = {"yes": 1.0, "maybe": 0.5, "no": 0.25, "conflict": 0.0}
DEFAULT_MISSING_LEVEL = "no"


@dataclass
class SimilarityTable:
    """Dense similarity matrix with the row and column labels it was read with."""

    S: np.ndarray
    papers: list
    reviewers: list


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            return [row for row in csv.reader(fh)]
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc.reason})") from exc


def _number(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot read {text!r} as a number", row, col) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", row, col)
    if value < 0:
        raise NegativeSimilarity(f"negative similarity {text!r}", row, col)
    return value


def load_similarity_csv(path):
    """Read a dense similarity CSV into a :class:`SimilarityTable`.

    Errors carry 1-based file row and column numbers.
    """
    rows = [r for r in _read_rows(path)]
    while rows and not any(cell.strip() for cell in rows[-1]):
        rows.pop()
    if not rows:
        raise ParseError(f"{path}: empty file", 1, None)
    header = [cell.strip() for cell in rows[0]]
    data = rows[1:]
    if not data:
        raise ParseError(f"{path}: no paper rows", 2, None)
    width = len(data[0])
    # header is either just the reviewer IDs or a corner cell plus the IDs
    reviewers = header[1:] if len(header) == width else header
    if len(reviewers) != width - 1:
        raise ParseError(
            f"header lists {len(reviewers)} reviewers but row 2 has {width - 1} values", 1, None
        )
    if len(reviewers) == 0:
        raise ParseError("no reviewer columns", 1, None)
    papers = []
    S = np.empty((len(data), len(reviewers)))
    for i, row in enumerate(data):
        lineno = i + 2
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", lineno, None)
        papers.append(row[0].strip())
        for j, cell in enumerate(row[1:]):
            S[i, j] = _number(cell.strip(), lineno, j + 2)
    return SimilarityTable(S, papers, reviewers)


def load_bids(path, level_map=None, missing_level=DEFAULT_MISSING_LEVEL, papers=None, reviewers=None):
    """Read bid triples into a :class:`SimilarityTable`.

    Paper and reviewer order is first appearance unless given explicitly.
    Level names are matched case-insensitively. A pair that is never bid
    on gets ``level_map[missing_level]``.
    """
    levels = {k.strip().lower(): float(v) for k, v in (level_map or DEFAULT_LEVELS).items()}
    if missing_level.lower() not in levels:
        raise UnknownLevel(f"missing-bid level {missing_level!r} is not in the level map", None, None)
    rows = _read_rows(path)
    if rows and [c.strip().lower() for c in rows[0]] == ["paper", "reviewer", "level"]:
        start, rows = 2, rows[1:]
    else:
        start = 1
    triples = []
    for i, row in enumerate(rows):
        lineno = i + start
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields (paper, reviewer, level), found {len(row)}", lineno, None)
        p, r, level = (cell.strip() for cell in row)
        key = level.lower()
        if key not in levels:
            raise UnknownLevel(f"unknown bid level {level!r}", lineno, 3)
        triples.append((p, r, levels[key], lineno))
    paper_ids = list(papers) if papers is not None else list(dict.fromkeys(t[0] for t in triples))
    reviewer_ids = list(reviewers) if reviewers is not None else list(dict.fromkeys(t[1] for t in triples))
    pi = {p: i for i, p in enumerate(paper_ids)}
    ri = {r: j for j, r in enumerate(reviewer_ids)}
    S = np.full((len(paper_ids), len(reviewer_ids)), levels[missing_level.lower()])
    seen = {}
    for p, r, value, lineno in triples:
        if p not in pi or r not in ri:
            raise ParseError(f"unknown paper or reviewer ({p!r}, {r!r})", lineno, None)
        if (p, r) in seen and seen[(p, r)] != value:
            raise ParseError(f"conflicting bids for ({p!r}, {r!r})", lineno, None)
        seen[(p, r)] = value
        S[pi[p], ri[r]] = value
    return SimilarityTable(S, paper_ids, reviewer_ids)


def parse_level_map(text):
    """Parse ``"yes=1,maybe=0.5,no=0.25,conflict=0"`` into a dict."""
    out = {}
    for item in text.split(","):
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise ParseError(f"bad level-map entry {item!r}; expected name=value")
        out[name.strip().lower()] = _number(value.strip(), None, None)
    return out


def format_float(v):
    """Decimal text with 17 significant digits; parses back to the same double."""
    return format(float(v), ".17g")


def write_matrix_csv(path, x, papers=None, reviewers=None):
    """Write a matrix in the similarity-CSV layout (17 significant digits) to a path or stream."""
    x = np.asarray(x, dtype=float)
    papers = papers or [f"p{i + 1}" for i in range(x.shape[0])]
    reviewers = reviewers or [f"r{j + 1}" for j in range(x.shape[1])]
    with open_text(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["paper", *reviewers])
        for pid, row in zip(papers, x):
            w.writerow([pid, *(format_float(v) for v in row)])


@contextmanager
def open_text(target):
    """Yield a writable text stream for a path, or the stream itself if one is given."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    return str(value)


@dataclass
class RunReport:
    """Everything needed to reproduce and inspect one run."""

    command: str
    config: dict
    instance: dict
    assignment: np.ndarray = None
    metrics: dict = None
    diagnostics: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["assignment"] = None if self.assignment is None else np.asarray(self.assignment, dtype=float)
        return _jsonable(d)

    def dumps(self):
        # json writes floats with repr, the shortest text that reads back to the same double
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    def write(self, path):
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("assignment") is not None:
            d["assignment"] = np.array(d["assignment"], dtype=float)
        return cls(**{k: d.get(k) for k in ("command", "config", "instance", "assignment", "metrics")},
                   diagnostics=d.get("diagnostics") or {}, extra=d.get("extra") or {})

    @classmethod
    def read(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})", exc.lineno, exc.colno) from exc


def load_assignment(path):
    """Read an assignment matrix from a run report (.json) or a matrix CSV."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        rep = RunReport.read(path)
        if rep.assignment is None:
            raise ParseError(f"{path}: report has no assignment")
        return rep.assignment
    return load_similarity_csv(path).S
