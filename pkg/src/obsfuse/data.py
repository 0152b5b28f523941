"""Unit records, fused datasets and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyGroup, MissingColumn, NonNumericCell, UnknownGroupTag, ValidationError

HEADER = ("y", "x", "z", "g")
GROUPS = ("E", "O")


@dataclass(frozen=True)
class UnitRecord:
    y: float
    x: float
    z: float
    g: str

    def __post_init__(self):
        if self.g not in GROUPS:
            raise ValueError(f"group tag must be E or O, got {self.g!r}")
        if not all(math.isfinite(v) for v in (self.y, self.x, self.z)):
            raise ValueError("y, x, z must be finite")


@dataclass(frozen=True)
class Block:
    """Column block (Y, X, Z) of one group."""

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return int(self.y.shape[0])

    def take(self, idx) -> "Block":
        return Block(self.y[idx], self.x[idx], self.z[idx])


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class FusedDataset:
    """Experimental and observational units stacked in file order.

    Columns are stored as read-only numpy arrays; ``is_exp`` marks rows tagged E.
    """

    def __init__(self, y, x, z, is_exp):
        self.y = _frozen(y)
        self.x = _frozen(x)
        self.z = _frozen(z)
        is_exp = np.array(is_exp, dtype=bool)
        is_exp.setflags(write=False)
        self.is_exp = is_exp
        n = self.y.shape[0]
        if not (self.x.shape == self.z.shape == is_exp.shape == (n,)):
            raise ValueError("columns must be 1-d and of equal length")
        for name, col in (("y", self.y), ("x", self.x), ("z", self.z)):
            if not np.all(np.isfinite(col)):
                raise ValueError(f"column {name} contains non-finite values")
        self.n_E = int(is_exp.sum())
        self.n_O = int(n - self.n_E)

    @classmethod
    def from_blocks(cls, exp: Block, obs: Block) -> "FusedDataset":
        return cls(
            np.concatenate([exp.y, obs.y]),
            np.concatenate([exp.x, obs.x]),
            np.concatenate([exp.z, obs.z]),
            np.concatenate([np.ones(len(exp), bool), np.zeros(len(obs), bool)]),
        )

    @classmethod
    def from_records(cls, records: Iterable[UnitRecord]) -> "FusedDataset":
        records = list(records)
        return cls(
            [r.y for r in records],
            [r.x for r in records],
            [r.z for r in records],
            [r.g == "E" for r in records],
        )

    def __len__(self) -> int:
        return int(self.y.shape[0])

    @property
    def records(self) -> list[UnitRecord]:
        return [
            UnitRecord(float(y), float(x), float(z), "E" if e else "O")
            for y, x, z, e in zip(self.y, self.x, self.z, self.is_exp)
        ]

    @property
    def pi_O(self) -> float:
        return self.n_O / len(self)

    @property
    def pi_E(self) -> float:
        return 1.0 - self.pi_O

    def drop_experimental(self, i: int) -> "FusedDataset":
        """Copy without the ``i``-th experimental unit (0-based among E rows)."""
        rows = np.flatnonzero(self.is_exp)
        keep = np.ones(len(self), bool)
        keep[rows[i]] = False
        return FusedDataset(self.y[keep], self.x[keep], self.z[keep], self.is_exp[keep])


def split(ds: FusedDataset) -> tuple[Block, Block]:
    """Partition into (experimental, observational) blocks, order preserved."""
    e = ds.is_exp
    o = ~e
    return Block(ds.y[e], ds.x[e], ds.z[e]), Block(ds.y[o], ds.x[o], ds.z[o])


def load_csv(path, require_groups: Sequence[str] = GROUPS) -> FusedDataset:
    """Read a ``y,x,z,g`` file.

    Data rows are numbered from 1 (the header is not counted) in error messages.
    ``require_groups`` lists the tags that must be present; pass ``()`` to accept
    single-group files.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn("y") from None
        for col in HEADER:
            if col not in header:
                raise MissingColumn(col)
        if tuple(header) != HEADER:
            raise ValidationError(f"header must be exactly 'y,x,z,g', got {','.join(header)!r}")
        ys, xs, zs, gs = [], [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ValidationError(f"row {row_no}: expected 4 fields, got {len(row)}")
            vals = []
            for col, cell in zip(HEADER[:3], row[:3]):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericCell(row_no, col, cell) from None
                if not math.isfinite(v):
                    raise NonNumericCell(row_no, col, cell)
                vals.append(v)
            tag = row[3].strip()
            if tag not in GROUPS:
                raise UnknownGroupTag(row_no, tag)
            ys.append(vals[0])
            xs.append(vals[1])
            zs.append(vals[2])
            gs.append(tag == "E")
    ds = FusedDataset(ys, xs, zs, gs)
    if "E" in require_groups and ds.n_E == 0:
        raise EmptyGroup("E")
    if "O" in require_groups and ds.n_O == 0:
        raise EmptyGroup("O")
    return ds


def write_csv(ds: FusedDataset, path) -> None:
    """Write ``ds`` with shortest round-trip float formatting."""
    lines = [",".join(HEADER)]
    for y, x, z, e in zip(ds.y.tolist(), ds.x.tolist(), ds.z.tolist(), ds.is_exp.tolist()):
        lines.append(f"{y!r},{x!r},{z!r},{'E' if e else 'O'}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
