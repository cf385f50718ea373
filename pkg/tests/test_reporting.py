import json
import math

import numpy as np
import pytest

from lorot.reporting import CheckReport, Entry, decode_value


def test_margin_conventions():
    assert Entry(t=0.5, Nprime=2.0, lhs=1.0, rhs=1.5).margin == pytest.approx(0.5)
    assert Entry(t=None, Nprime=None, lhs=-math.inf, rhs=-math.inf).margin == 0.0
    assert Entry(t=None, Nprime=None, lhs=math.inf, rhs=math.inf).margin == 0.0
    assert Entry(t=None, Nprime=None, lhs=-math.inf, rhs=1.0).margin == math.inf
    assert Entry(t=None, Nprime=None, lhs=1.0, rhs=-math.inf).margin == -math.inf


def test_report_pass_threshold():
    entries = [Entry(t=0.0, Nprime=2.0, lhs=0.0, rhs=-0.04)]
    report = CheckReport(spec={"check": "x"}, entries=entries, tolerance=0.05,
                         discretization={"h": 0.1})
    assert report.passed
    assert report.worst_margin == pytest.approx(-0.04)
    tight = CheckReport(spec={"check": "x"}, entries=entries, tolerance=0.01,
                        discretization={"h": 0.1})
    assert not tight.passed
    empty = CheckReport(spec={}, entries=[], tolerance=0.0, discretization={"h": 1.0})
    assert empty.passed and empty.worst_margin == math.inf


def test_eps_defaults_into_discretization():
    report = CheckReport(spec={}, entries=[], tolerance=0.25, discretization={"h": 1.0})
    assert report.discretization["eps"] == 0.25
    kept = CheckReport(spec={}, entries=[], tolerance=0.25,
                       discretization={"h": 1.0, "eps": 0.5})
    assert kept.discretization["eps"] == 0.5


def test_label_selectors():
    entries = [
        Entry(t=0.5, Nprime=2.0, lhs=0.0, rhs=1.0, label="a"),
        Entry(t=0.5, Nprime=3.0, lhs=0.0, rhs=2.0, label="b"),
        Entry(t=0.5, Nprime=4.0, lhs=0.0, rhs=3.0, label="b"),
    ]
    report = CheckReport(spec={}, entries=entries, tolerance=0.0,
                         discretization={"h": 1.0})
    assert report.entry("a").rhs == 1.0
    assert [e.rhs for e in report.labeled("b")] == [2.0, 3.0]
    with pytest.raises(KeyError):
        report.entry("missing")


def test_infinities_serialize_as_strings(tmp_path):
    entries = [Entry(t=0.25, Nprime=2.0, lhs=math.inf, rhs=1.0)]
    report = CheckReport(spec={"bound": -math.inf}, entries=entries, tolerance=0.0,
                         discretization={"h": 0.5})
    text = report.to_json()  # allow_nan=False: must not emit Infinity
    doc = json.loads(text)
    assert doc["entries"][0]["lhs"] == "inf"
    assert doc["entries"][0]["margin"] == "-inf"
    assert doc["spec"]["bound"] == "-inf"
    assert decode_value(doc["entries"][0]["lhs"]) == math.inf
    assert decode_value(doc["spec"]) == {"bound": -math.inf}
    path = tmp_path / "r.json"
    report.write_json(path)
    assert json.loads(path.read_text()) == doc


def test_numpy_scalars_are_coerced():
    entries = [
        Entry(t=np.float64(0.5), Nprime=np.float64(2.0),
              lhs=np.float64(1.0), rhs=np.float64(2.0))
    ]
    report = CheckReport(spec={}, entries=entries, tolerance=np.float64(0.1),
                         discretization={"h": np.float64(0.5)})
    assert isinstance(report.passed, bool)
    assert isinstance(report.worst_margin, float)
    json.dumps(report.to_dict())  # must not raise on numpy types


def test_csv_layout(tmp_path):
    entries = [
        Entry(t=0.5, Nprime=2.0, lhs=1.0, rhs=1.25),
        Entry(t=None, Nprime=None, lhs=0.0, rhs=math.inf),
    ]
    report = CheckReport(spec={}, entries=entries, tolerance=0.0,
                         discretization={"h": 1.0})
    path = tmp_path / "r.csv"
    report.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,Nprime,lhs,rhs,margin"
    assert lines[1] == "0.5,2.0,1.0,1.25,0.25"
    assert lines[2] == ",,0.0,inf,inf"
