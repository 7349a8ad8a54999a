import json
import math
import warnings

import numpy as np
import pytest

from contextlab.fileio import (
    CLICK_HEADER,
    E_DELTA_COLUMNS,
    ClickStreamError,
    dumps_report,
    parse_click_stream,
    to_jsonable,
    write_click_stream,
    write_csv_table,
    write_report,
)
from contextlab.inequalities import CorrelationSet, chsh_s
from contextlab.stats import OutcomeSeries

HEADER = ",".join(CLICK_HEADER) + "\n"


def _write(tmp_path, body, name="c.csv"):
    p = tmp_path / name
    p.write_text(HEADER + body)
    return p


def test_four_row_file(tmp_path):
    p = _write(tmp_path, "0,10,A,a=0,1\n0,12,B,b=0,-1\n1,20,A,a=0,0\n1,25,B,b=0,1\n")
    a, b = parse_click_stream(p)
    assert len(a) == len(b) == 2
    assert a.outcomes.tolist() == [1, 0] and b.timestamps.tolist() == [12, 25]
    assert a.setting_label == "a=0"


@pytest.mark.parametrize("row, msg", [
    ("0,10,A,a,2\n", r":2: unknown outcome token '2'"),
    ("0,10,A,a,+1\n", "outcome token"),
    ("0,10,C,a,1\n", "unknown side"),
    ("0,-5,A,a,1\n", "unsigned"),
    ("0,10,A,a\n", "expected 5 fields"),
    ("0,10,A,a,1\n1,9,A,a,1\n", r":3: timestamps on side A are not sorted"),
    ("0,10,A,a,1\n1,11,A,b,1\n", "mixes setting labels"),
])
def test_click_stream_errors(tmp_path, row, msg):
    with pytest.raises(ClickStreamError, match=msg):
        parse_click_stream(_write(tmp_path, row))


def test_bad_header(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("trial,timestamp_ns,side,setting_label,outcome\n")
    with pytest.raises(ClickStreamError, match=":1: header"):
        parse_click_stream(p)


def test_empty_file_warns(tmp_path):
    with pytest.warns(UserWarning, match="no data rows"):
        a, b = parse_click_stream(_write(tmp_path, ""))
    assert len(a) == len(b) == 0


def test_click_roundtrip(tmp_path):
    a = OutcomeSeries([1, -1, 0], [0, 5, 9], "a=0")
    b = OutcomeSeries([-1, 1], [1, 7], "b=1")
    p = write_click_stream(tmp_path / "r.csv", a, b)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ra, rb = parse_click_stream(p)
    assert ra == a and rb == b
    with pytest.raises(ValueError):
        write_click_stream(tmp_path / "x.csv", OutcomeSeries([1]), b)


def test_report_float_format():
    text = dumps_report({"x": 0.1, "i": 3, "f": 2.0, "nan": math.nan, "big": 1e300, "np": np.float64(1 / 3)})
    d = json.loads(text)
    assert d == {"x": 0.1, "i": 3, "f": 2.0, "nan": None, "big": 1e300, "np": 1 / 3}
    assert '"f": 2.0' in text and '"np": 0.33333333333333331' in text


def test_report_keeps_insertion_order_and_is_deterministic(tmp_path):
    res = {"b": [1, 2], "a": {"z": True, "y": None}}
    p1 = write_report(tmp_path / "r1.json", res)
    p2 = write_report(tmp_path / "r2.json", res)
    assert p1.read_bytes() == p2.read_bytes()
    d = json.loads(p1.read_text())
    assert list(d) == ["b", "a", "artifact_version"]


def test_correlation_set_report_schema():
    c = CorrelationSet(-0.7, 0.7, -0.7, -0.7, stderrs=(0.01,) * 4)
    d = json.loads(dumps_report({"cs": c, "chsh": chsh_s(c)}))
    assert {"E_ab", "E_abp", "E_apb", "E_apbp"} <= set(d["cs"])
    assert {"S", "sigma_excess", "bound_satisfied", "max_abs"} <= set(d["chsh"])


def test_unserialisable():
    with pytest.raises(TypeError):
        to_jsonable({"x": object()})


def test_e_delta_csv(tmp_path):
    p = write_csv_table(tmp_path / "e.csv", E_DELTA_COLUMNS, [(0.0, -1.0, -0.99, 0.01)])
    lines = p.read_text().splitlines()
    assert lines[0] == "delta_rad,E_analytic,E_estimate,stderr"
    assert lines[1] == "0.0,-1.0,-0.98999999999999999,0.01"
    with pytest.raises(ValueError):
        write_csv_table(tmp_path / "bad.csv", E_DELTA_COLUMNS, [(1.0,)])
