"""Functional model of the content-addressable memory (CAM).

Bit indexing is LSB-first throughout: column ``c`` of a field holds bit ``c``
(weight ``2**c``) of the stored integer. The prose convention of writing keys
MSB-left ("key 100") therefore maps to ``bits[::-1]`` here.

Match semantics are ideal and digital. Host-side :func:`load_field` and
:func:`read_field` are free: they never touch cycle or write counters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


class ContractError(ValueError):
    """Raised when an operation's preconditions are violated."""


def _bitvec(bits, length: int, name: str) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if arr.shape[0] != length:
        raise ContractError(f"{name} has length {arr.shape[0]}, expected {length}")
    if np.any(arr > 1):
        raise ContractError(f"{name} must contain only 0/1")
    return arr


class KeyMask:
    """A (key, mask) pair spanning every column of a CAM.

    Key bits under a zero mask bit are canonicalised to 0.
    """

    __slots__ = ("key", "mask", "columns", "values")

    def __init__(self, key, mask):
        mask = _bitvec(mask, len(np.asarray(mask).reshape(-1)), "mask")
        key = _bitvec(key, mask.shape[0], "key")
        self.mask = mask
        self.key = key & mask
        self.columns = np.flatnonzero(mask)
        self.values = self.key[self.columns]

    @classmethod
    def sparse(cls, width: int, assignment: Mapping[int, int]) -> "KeyMask":
        """Build from ``{column: bit}``; unlisted columns are masked out."""
        key = np.zeros(width, dtype=np.uint8)
        mask = np.zeros(width, dtype=np.uint8)
        for col, bit in assignment.items():
            if not 0 <= col < width:
                raise ContractError(f"column {col} outside 0..{width - 1}")
            mask[col] = 1
            key[col] = bit
        return cls(key, mask)

    @property
    def width(self) -> int:
        return self.mask.shape[0]

    def __eq__(self, other):
        if not isinstance(other, KeyMask):
            return NotImplemented
        return np.array_equal(self.key, other.key) and np.array_equal(self.mask, other.mask)

    def __repr__(self):
        def s(v):
            return "".join(map(str, v[::-1]))
        return f"KeyMask(key={s(self.key)}, mask={s(self.mask)})"


@dataclass(frozen=True)
class TagVector:
    """Per-row match flags produced by a compare."""

    bits: np.ndarray
    popcount: int = field(init=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if np.any(bits > 1):
            raise ContractError("tag bits must be 0/1")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "popcount", int(bits.sum()))

    def __len__(self):
        return self.bits.shape[0]


class CamArray:
    """Bit matrix plus tag column and per-cell wear counters.

    ``write_counts`` counts driven cells (a tagged row under a set mask bit),
    whether or not the stored value changes. ``flip_counts`` counts only the
    writes that actually changed a stored bit.
    """

    def __init__(self, rows: int, cols: int, fill: int = 0):
        if rows < 1 or cols < 1:
            raise ContractError(f"CAM dimensions must be positive, got {rows}x{cols}")
        if fill not in (0, 1):
            raise ContractError("fill must be 0 or 1")
        self.cells = np.full((rows, cols), fill, dtype=np.uint8)
        self.tags = np.zeros(rows, dtype=np.uint8)
        self.write_counts = np.zeros((rows, cols), dtype=np.int64)
        self.flip_counts = np.zeros((rows, cols), dtype=np.int64)

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    def tag_vector(self) -> TagVector:
        return TagVector(self.tags.copy())

    def compare(self, km: KeyMask) -> TagVector:
        if km.width != self.cols:
            raise ContractError(f"key/mask width {km.width} != CAM width {self.cols}")
        if km.columns.size == 0:
            tags = np.ones(self.rows, dtype=np.uint8)
        else:
            tags = np.all(self.cells[:, km.columns] == km.values, axis=1).astype(np.uint8)
        self.tags = tags
        return TagVector(tags.copy())

    def write(self, km: KeyMask, tags: TagVector | None = None) -> None:
        """Write the masked key into every tagged row (current tags by default)."""
        if km.width != self.cols:
            raise ContractError(f"key/mask width {km.width} != CAM width {self.cols}")
        t = self.tags if tags is None else tags.bits
        if t.shape[0] != self.rows:
            raise ContractError(f"tag length {t.shape[0]} != rows {self.rows}")
        rows = np.flatnonzero(t)
        if rows.size == 0 or km.columns.size == 0:
            return
        idx = np.ix_(rows, km.columns)
        old = self.cells[idx]
        self.flip_counts[idx] += old != km.values
        self.write_counts[idx] += 1
        self.cells[idx] = km.values

    def read_field(self, field: Sequence[int] | range, row: int) -> int:
        cols = self._check_field(field)
        if not 0 <= row < self.rows:
            raise ContractError(f"row {row} outside 0..{self.rows - 1}")
        return int(sum(int(b) << i for i, b in enumerate(self.cells[row, cols])))

    def read_all(self, field: Sequence[int] | range) -> list[int]:
        """Host read of a field from every row."""
        cols = self._check_field(field)
        bits = self.cells[:, cols]
        return [int(sum(int(b) << i for i, b in enumerate(r))) for r in bits]

    def load_field(self, field: Sequence[int] | range, values: Iterable[int]) -> None:
        cols = self._check_field(field)
        values = [int(v) for v in values]
        if len(values) != self.rows:
            raise ContractError(f"{len(values)} values for {self.rows} rows")
        width = len(cols)
        for v in values:
            if v < 0 or v >> width:
                raise ContractError(f"value {v} does not fit in {width} bits")
        bits = np.array([[(v >> i) & 1 for i in range(width)] for v in values], dtype=np.uint8)
        self.cells[:, cols] = bits.reshape(self.rows, width)

    def fill_columns(self, cols: Sequence[int], value: int) -> None:
        """Uncharged host initialisation of whole columns."""
        self.cells[:, list(cols)] = value

    def _check_field(self, field) -> list[int]:
        cols = list(field)
        if not cols or min(cols) < 0 or max(cols) >= self.cols:
            raise ContractError(f"field {field!r} outside 0..{self.cols - 1}")
        return cols


def cam_new(rows: int, cols: int, fill: int = 0) -> CamArray:
    return CamArray(rows, cols, fill)


def compare(cam: CamArray, km: KeyMask) -> TagVector:
    return cam.compare(km)


def write(cam: CamArray, km: KeyMask, tags: TagVector | None = None) -> None:
    cam.write(km, tags)


def read_field(cam: CamArray, field, row: int) -> int:
    return cam.read_field(field, row)


def load_field(cam: CamArray, field, values) -> None:
    cam.load_field(field, values)
