from __future__ import annotations

import numpy as np
import pytest

from obsfuse.data import Block, FusedDataset, UnitRecord, load_csv, split, write_csv
from obsfuse.errors import EmptyGroup, MissingColumn, NonNumericCell, UnknownGroupTag, ValidationError


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_bytes(text.encode())
    return p


def test_counts_two_e_three_o(tmp_path):
    p = _write(tmp_path, "y,x,z,g\n1,2,3,E\n1,2,3,O\n4,5,6,E\n1,1,1,O\n0,0,0,O\n")
    ds = load_csv(p)
    assert (ds.n_E, ds.n_O, len(ds)) == (2, 3, 5)
    assert ds.pi_O == pytest.approx(0.6)


def test_unknown_group_tag_names_row(tmp_path):
    p = _write(tmp_path, "y,x,z,g\n1,2,3,E\n1,2,3,O\n1,2,3,E\n1,2,3,X\n")
    with pytest.raises(UnknownGroupTag) as ei:
        load_csv(p)
    assert ei.value.row == 4
    assert "UnknownGroupTag" in str(ei.value)


def test_missing_column(tmp_path):
    with pytest.raises(MissingColumn) as ei:
        load_csv(_write(tmp_path, "y,x,g\n1,2,E\n"))
    assert ei.value.column == "z"


def test_header_must_be_exact(tmp_path):
    with pytest.raises(ValidationError):
        load_csv(_write(tmp_path, "x,y,z,g\n1,2,3,E\n"))


@pytest.mark.parametrize("cell", ["abc", "nan", "inf", ""])
def test_non_numeric_cell(tmp_path, cell):
    with pytest.raises(NonNumericCell) as ei:
        load_csv(_write(tmp_path, f"y,x,z,g\n1,2,3,E\n1,{cell},3,O\n"))
    assert (ei.value.row, ei.value.col) == (2, "x")


def test_empty_group(tmp_path):
    p = _write(tmp_path, "y,x,z,g\n1,2,3,E\n2,2,3,E\n")
    with pytest.raises(EmptyGroup) as ei:
        load_csv(p)
    assert ei.value.group == "O"
    assert load_csv(p, require_groups=("E",)).n_O == 0


def test_crlf_and_blank_lines(tmp_path):
    ds = load_csv(_write(tmp_path, "y,x,z,g\r\n1,2,3,E\r\n\r\n4,5,6,O\r\n"))
    assert ds.n_E == ds.n_O == 1
    assert ds.y.tolist() == [1.0, 4.0]


def test_round_trip_1000_rows(tmp_path):
    rng = np.random.default_rng(3)
    n = 1000
    ds = FusedDataset(rng.standard_normal(n) * 1e3, rng.standard_normal(n), rng.standard_normal(n) * 1e-7, rng.random(n) < 0.3)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(ds, p1)
    back = load_csv(p1)
    for col in ("y", "x", "z", "is_exp"):
        np.testing.assert_array_equal(getattr(back, col), getattr(ds, col))
    write_csv(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_loading_is_deterministic(tmp_path):
    p = _write(tmp_path, "y,x,z,g\n1.5,2,3,E\n-1,0.25,3e-3,O\n")
    a, b = load_csv(p), load_csv(p)
    assert a.records == b.records


def test_split_only_experimental():
    ds = FusedDataset([1, 2, 3], [1, 2, 4], [0, 1, 0], [True, True, True])
    exp, obs = split(ds)
    assert len(exp) == 3 and len(obs) == 0


def test_split_mixed_sizes_and_order():
    ds = FusedDataset([1, 2, 3, 4, 5], [0, 0, 0, 0, 0], [9, 8, 7, 6, 5], [True, False, True, False, False])
    exp, obs = split(ds)
    assert (len(exp), len(obs)) == (ds.n_E, ds.n_O) == (2, 3)
    assert exp.y.tolist() == [1, 3] and obs.y.tolist() == [2, 4, 5]


def test_split_groupwise_means_large():
    rng = np.random.default_rng(0)
    n = 10_000
    g = rng.random(n) < 0.2
    z = rng.standard_normal(n) + 3 * g
    ds = FusedDataset(np.zeros(n), np.zeros(n), z, g)
    exp, obs = split(ds)
    expected_e = sum(v for v, t in zip(z.tolist(), g.tolist()) if t) / g.sum()
    expected_o = sum(v for v, t in zip(z.tolist(), g.tolist()) if not t) / (~g).sum()
    assert abs(exp.z.mean() - expected_e) < 1e-12
    assert abs(obs.z.mean() - expected_o) < 1e-12
    assert len(exp) + len(obs) == n


def test_unit_record_invariants():
    with pytest.raises(ValueError):
        UnitRecord(1.0, 2.0, 3.0, "X")
    with pytest.raises(ValueError):
        UnitRecord(float("nan"), 2.0, 3.0, "E")
    ds = FusedDataset.from_records([UnitRecord(1, 2, 3, "E"), UnitRecord(4, 5, 6, "O")])
    assert ds.records[1] == UnitRecord(4.0, 5.0, 6.0, "O")


def test_dataset_is_read_only():
    ds = FusedDataset([1.0], [2.0], [3.0], [True])
    with pytest.raises(ValueError):
        ds.y[0] = 5.0


def test_drop_experimental_and_blocks():
    exp = Block(np.array([1.0, 2, 3]), np.array([0.0, 1, 2]), np.array([5.0, 6, 7]))
    obs = Block(np.array([9.0]), np.array([9.0]), np.array([9.0]))
    ds = FusedDataset.from_blocks(exp, obs)
    dropped = ds.drop_experimental(1)
    assert dropped.n_E == 2 and dropped.n_O == 1
    assert split(dropped)[0].y.tolist() == [1.0, 3.0]
