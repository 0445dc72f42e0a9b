import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randmatch.errors import NegativeSimilarity, ParseError, UnknownLevel
from randmatch.io import (
    RunReport,
    format_float,
    load_assignment,
    load_bids,
    load_similarity_csv,
    parse_level_map,
    write_matrix_csv,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_similarity_basic(tmp_path):
    t = load_similarity_csv(write(tmp_path, "s.csv", "r1,r2\np1,1,0\np2,0,1\n"))
    assert t.S.tolist() == [[1, 0], [0, 1]]
    assert t.papers == ["p1", "p2"] and t.reviewers == ["r1", "r2"]


def test_similarity_corner_cell_and_scientific(tmp_path):
    t = load_similarity_csv(write(tmp_path, "s.csv", "paper,r1,r2\np1,1e-3,0.5\n"))
    assert t.S.tolist() == [[0.001, 0.5]]


def test_ragged_row(tmp_path):
    with pytest.raises(ParseError) as err:
        load_similarity_csv(write(tmp_path, "s.csv", "r1,r2\np1,1,0\np2,0\n"))
    assert err.value.row == 3


def test_bad_number_location(tmp_path):
    with pytest.raises(ParseError) as err:
        load_similarity_csv(write(tmp_path, "s.csv", "r1,r2\np1,1,x\n"))
    assert (err.value.row, err.value.column) == (2, 3)


def test_negative_similarity(tmp_path):
    with pytest.raises(NegativeSimilarity):
        load_similarity_csv(write(tmp_path, "s.csv", "r1,r2\np1,1,-0.5\n"))


def test_bids_default_levels(tmp_path):
    t = load_bids(write(tmp_path, "b.csv", "paper,reviewer,level\np1,r1,yes\np1,r2,conflict\np2,r1,maybe\n"))
    assert t.papers == ["p1", "p2"] and t.reviewers == ["r1", "r2"]
    assert t.S.tolist() == [[1.0, 0.0], [0.5, 0.25]]


def test_bids_custom_map(tmp_path):
    path = write(tmp_path, "b.csv", "p1,r1,YES\np1,r2,no\n")
    t = load_bids(path, parse_level_map("yes=2,no=1"), missing_level="no")
    assert t.S.tolist() == [[2.0, 1.0]]


def test_unknown_level(tmp_path):
    with pytest.raises(UnknownLevel) as err:
        load_bids(write(tmp_path, "b.csv", "p1,r1,perhaps\n"))
    assert err.value.row == 1


def test_conflicting_duplicate_bids(tmp_path):
    with pytest.raises(ParseError):
        load_bids(write(tmp_path, "b.csv", "p1,r1,yes\np1,r1,no\n"))


def test_level_map_errors():
    with pytest.raises(ParseError):
        parse_level_map("yes")


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=st.floats(0, 1)))
def test_matrix_csv_roundtrip_bitwise(tmp_path_factory, x):
    path = tmp_path_factory.mktemp("m") / "x.csv"
    write_matrix_csv(path, x)
    assert np.array_equal(load_assignment(path), x)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=st.floats(0, 1)))
def test_report_roundtrip_bitwise(tmp_path_factory, x):
    path = tmp_path_factory.mktemp("r") / "run.json"
    RunReport("solve", {"Q": "1/2"}, {"n_p": x.shape[0]}, x, {"quality": 1.0}).write(path)
    assert np.array_equal(load_assignment(path), x)
    assert RunReport.read(path).config == {"Q": "1/2"}


def test_format_float_is_exact():
    for v in (0.1, 1 / 3, 2.0**-40, 12345.678):
        assert float(format_float(v)) == v


def test_stream_output():
    buf = io.StringIO()
    write_matrix_csv(buf, np.array([[0.5, 0.5]]), ["a"], ["x", "y"])
    assert buf.getvalue() == "paper,x,y\na,0.5,0.5\n"


def test_invalid_json_report(tmp_path):
    with pytest.raises(ParseError):
        RunReport.read(write(tmp_path, "bad.json", "{"))


def test_report_serializes_fractions_and_inf():
    from fractions import Fraction

    d = json.loads(RunReport("x", {"Q": Fraction(1, 3)}, {}, None, None, {"gap": float("inf")}).dumps())
    assert d["config"]["Q"] == "1/3"
    assert d["diagnostics"]["gap"] == "inf"
