import os
import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xychain.errors import IoError
from xychain.io import (
    HEADER,
    atomic_write,
    emit_svg_heatmap,
    format_value,
    parse_value,
    read_csv,
    read_json,
    svg_heatmap,
    write_table,
)
from xychain.scan import Grid, scan_sign

ROWS = [(1, 0.3141592653589793, 0.7071067811865476, -1.25), (2, 1e-300, 0.0, float("inf"))]


@given(st.floats(allow_nan=False) | st.integers(-10**12, 10**12))
def test_format_value_round_trips(v):
    assert parse_value(format_value(v)) == v


def test_csv_round_trip(tmp_path):
    path = tmp_path / "spec.csv"
    write_table(path, "spectrum", ROWS)
    assert path.read_text().splitlines()[:2] == [HEADER, "k,phi,epsilon,theta"]
    columns, rows = read_csv(path)
    assert columns == ("k", "phi", "epsilon", "theta")
    assert rows == ROWS


def test_json_round_trip(tmp_path):
    path = tmp_path / "spec.json"
    write_table(path, "spectrum", ROWS, extra={"L": 8})
    columns, rows = read_json(path)
    assert rows == ROWS


def test_read_rejects_missing_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("k,phi\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(path)
    with pytest.raises(IoError):
        read_csv(tmp_path / "absent.csv")


def test_row_width_checked(tmp_path):
    with pytest.raises(ValueError):
        write_table(tmp_path / "x.csv", "series", [(1, 2.0)])


def test_atomic_write_failure_leaves_no_file(tmp_path):
    with pytest.raises(IoError) as info:
        atomic_write(tmp_path / "missing" / "out.csv", "x")
    assert info.value.exit_code == 4
    target = tmp_path / "dir-target"
    target.mkdir()
    with pytest.raises(IoError):
        atomic_write(target, "x")
    assert [p.name for p in tmp_path.iterdir()] == ["dir-target"]


def test_svg_two_by_two():
    values = np.array([[1.0, -1.0], [0.0, 1.0]])
    signs = np.sign(values)
    text = svg_heatmap([0, 1], [0, 1], values, signs, 1.0, (0, 1, 0, 1))
    fills = re.findall(r'<rect [^>]*fill="(#[0-9a-f]{6})"', text)
    assert len(fills) == 4
    assert fills.count("#ffffff") == 1


def test_svg_deterministic_and_compact(tmp_path):
    signmap = scan_sign(Grid(0, 1.6, 0, 1.6, 200, 200), 10, "deltaRicci", 1.0)
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_svg_heatmap(signmap, a)
    emit_svg_heatmap(signmap, b)
    assert a.read_bytes() == b.read_bytes()
    assert os.path.getsize(a) < 5 * 2**20


def test_report_figures(tmp_path):
    from xychain.report import plot_em_compare, plot_series, plot_sign_map
    from xychain.scaling import build_series, fit_exponential

    series = build_series("deltaE", 0.5, 0.5, range(8, 33, 2))
    plot_series(series, tmp_path / "s.png", fit_exponential(series))
    plot_sign_map(scan_sign(Grid(0, 1, 0, 1, 12, 12), 8, "ricciProduct"), tmp_path / "m.png")
    plot_em_compare([(100, 1e-3, 1e-3, 1e-3, 1e-3), (200, 5e-4, 5e-4, 5e-4, 5e-4)], tmp_path / "e.svg")
    for name in ("s.png", "m.png", "e.svg"):
        assert (tmp_path / name).stat().st_size > 0
    a = tmp_path / "s2.png"
    plot_series(series, a)
    plot_series(series, tmp_path / "s3.png")
    assert a.read_bytes() == (tmp_path / "s3.png").read_bytes()


def test_atomic_write_honours_umask(tmp_path):
    old = os.umask(0o022)
    try:
        atomic_write(tmp_path / "x.txt", "x")
    finally:
        os.umask(old)
    assert (tmp_path / "x.txt").stat().st_mode & 0o777 == 0o644
