"""Bit-serial micro-programs for the primitive vector operations.

Each operation is emitted as a flat list of compare/write steps over a field
layout. Slice-level behaviour comes from truth tables compiled by
:mod:`apsim.lut`; the program walks bit slices LSB to MSB and binds each
compiled pass to concrete CAM columns.

Cycle model: one compare cycle plus one write cycle per pass. Host-side
initialisation of result/carry columns (``HostInit``) is free.

Operand conventions (all values unsigned bit patterns, LSB-first):

========  ===========================================  =====================
op        result                                       fields
========  ===========================================  =====================
NOT       R = ~A                                       A R
AND/OR/   R = A op B                                   A B R
XOR
ADD_IP    B = A + B (mod 2^m), C = carry out           A B C
SUB_IP    B = B - A (mod 2^m), C = 1 iff no borrow     A B C
ADD_OOP   R = A + B (mod 2^m), C = carry out           A B R C
SUB_OOP   R = A - B (mod 2^m), C = 1 iff no borrow     A B R C
NEG_OOP   R = -A (mod 2^m)                             A R F
ABS_OOP   R = |A| for signed A, as m-bit unsigned      A R F
MUL_U     R = A * B (2m bits)                          A B R
MUL_S     R = A * B signed (mod 2^2m)                  A B R C EXT
MAC_U     R += A * B (mod 2^2m)                        A B R C
MAC_S     R += A * B signed (mod 2^2m)                 A B R C EXT
========  ===========================================  =====================
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from apsim import lut
from apsim.cam import CamArray, ContractError, KeyMask


class OpKind(str, enum.Enum):
    NOT = "NOT"
    AND = "AND"
    OR = "OR"
    XOR = "XOR"
    ADD_IP = "ADD_IP"
    ADD_OOP = "ADD_OOP"
    SUB_IP = "SUB_IP"
    SUB_OOP = "SUB_OOP"
    NEG_OOP = "NEG_OOP"
    ABS_OOP = "ABS_OOP"
    MUL_U = "MUL_U"
    MUL_S = "MUL_S"
    MAC_U = "MAC_U"
    MAC_S = "MAC_S"

    @classmethod
    def parse(cls, name: str) -> "OpKind":
        try:
            return cls(name.upper())
        except ValueError:
            raise ContractError(f"unknown op {name!r}") from None


SIGNED = {OpKind.ABS_OOP, OpKind.MUL_S, OpKind.MAC_S}

_RUNTIME = {
    OpKind.NOT: lambda m: 2 * m,
    OpKind.AND: lambda m: 2 * m,
    OpKind.OR: lambda m: 6 * m,
    OpKind.XOR: lambda m: 6 * m,
    OpKind.ADD_IP: lambda m: 10 * m,
    OpKind.SUB_IP: lambda m: 10 * m,
    OpKind.ADD_OOP: lambda m: 11 * m,
    OpKind.SUB_OOP: lambda m: 11 * m,
    OpKind.NEG_OOP: lambda m: 6 * m,
    OpKind.ABS_OOP: lambda m: 8 * m,
    OpKind.MUL_U: lambda m: 10 * m * m,
    OpKind.MUL_S: lambda m: 10 * m * m + 4 * m - 14,
    OpKind.MAC_U: lambda m: 10 * m * m + 10 * m,
    OpKind.MAC_S: lambda m: 10 * m * m + 14 * m - 14,
}

_AREA = {
    OpKind.NOT: lambda m: 2 * m,
    OpKind.AND: lambda m: 3 * m,
    OpKind.OR: lambda m: 3 * m,
    OpKind.XOR: lambda m: 3 * m,
    OpKind.ADD_IP: lambda m: 2 * m + 1,
    OpKind.SUB_IP: lambda m: 2 * m + 1,
    OpKind.ADD_OOP: lambda m: 3 * m + 1,
    OpKind.SUB_OOP: lambda m: 3 * m + 1,
    OpKind.NEG_OOP: lambda m: 2 * m + 1,
    OpKind.ABS_OOP: lambda m: 2 * m + 1,
    OpKind.MUL_U: lambda m: 4 * m,
    OpKind.MUL_S: lambda m: 8 * m + 4,
    OpKind.MAC_U: lambda m: 4 * m,
    OpKind.MAC_S: lambda m: 8 * m + 4,
}


def table_runtime(op: OpKind | str, m: int) -> int:
    """Closed-form cycle count from the published runtime table."""
    return _RUNTIME[OpKind.parse(op) if isinstance(op, str) else op](m)


def table_area(op: OpKind | str, m: int) -> int:
    """Published bits-per-row for ``op`` at width ``m``."""
    return _AREA[OpKind.parse(op) if isinstance(op, str) else op](m)


# --- slice truth tables ------------------------------------------------------

def _full_add(x, r, c):
    s = x + r + c
    return s & 1, s >> 1


SLICE_TABLES: dict[str, lut.TruthTable] = {
    t.name: t for t in [
        lut.TruthTable.from_function(["a"], ["r"], lambda a: 1 - a, name="not"),
        lut.TruthTable.from_function(["a", "b"], ["r"], lambda a, b: a & b, name="and"),
        lut.TruthTable.from_function(["a", "b"], ["r"], lambda a, b: a | b, name="or"),
        lut.TruthTable.from_function(["a", "b"], ["r"], lambda a, b: a ^ b, name="xor"),
        lut.TruthTable.from_function(["a", "b", "c"], ["b", "c"],
                                     lambda a, b, c: _full_add(a, b, c), name="add_ip"),
        lut.TruthTable.from_function(["a", "b", "c"], ["b", "c"],
                                     lambda a, b, c: _full_add(1 - a, b, c), name="sub_ip"),
        lut.TruthTable.from_function(["a", "b", "c"], ["r", "c"],
                                     lambda a, b, c: _full_add(a, b, c), name="add_oop"),
        lut.TruthTable.from_function(["a", "b", "c"], ["r", "c"],
                                     lambda a, b, c: _full_add(a, 1 - b, c), name="sub_oop"),
        # two's complement: copy bits up to the first 1, invert the rest
        lut.TruthTable.from_function(["a", "f"], ["r", "f"],
                                     lambda a, f: (1 - a, 1) if f else (a, a), name="neg"),
        lut.TruthTable.from_function(["a", "f", "s"], ["r", "f"],
                                     lambda a, f, s: (a, f) if not s else ((1 - a, 1) if f else (a, a)),
                                     name="abs"),
        lut.TruthTable.from_function(["s", "f"], ["r"], lambda s, f: s & (1 - f), name="abs_top"),
        # predicated accumulate: hold unless p
        lut.TruthTable.from_function(["x", "r", "c", "p"], ["r", "c"],
                                     lambda x, r, c, p: _full_add(x, r, c) if p else (r, c), name="padd"),
        lut.TruthTable.from_function(["x", "r", "c", "p"], ["r", "c"],
                                     lambda x, r, c, p: _full_add(1 - x, r, c) if p else (r, c),
                                     name="padd_not"),
        # constant addend 1; the carry out is produced but never consumed
        lut.TruthTable.from_function(["r", "c", "p"], ["r", "c"],
                                     lambda r, c, p: _full_add(1, r, c) if p else (r, c), name="padd_one"),
    ]
}

OP_TABLES: dict[OpKind, tuple[str, ...]] = {
    OpKind.NOT: ("not",),
    OpKind.AND: ("and",),
    OpKind.OR: ("or",),
    OpKind.XOR: ("xor",),
    OpKind.ADD_IP: ("add_ip",),
    OpKind.SUB_IP: ("sub_ip",),
    OpKind.ADD_OOP: ("add_oop",),
    OpKind.SUB_OOP: ("sub_oop",),
    OpKind.NEG_OOP: ("neg",),
    OpKind.ABS_OOP: ("abs", "abs_top"),
    OpKind.MUL_U: ("and", "padd"),
    OpKind.MUL_S: ("and", "padd", "padd_not", "padd_one"),
    OpKind.MAC_U: ("padd",),
    OpKind.MAC_S: ("padd", "padd_not", "padd_one"),
}


@lru_cache(maxsize=None)
def slice_schedule(name: str, minimize: bool = False) -> lut.LutSchedule:
    sched = lut.compile_table(SLICE_TABLES[name], minimize=minimize)
    if sched.scratch_columns:
        raise ContractError(f"slice table {name!r} needs scratch columns")
    return sched


# --- program representation --------------------------------------------------

@dataclass(frozen=True)
class Compare:
    cols: tuple[int, ...]
    bits: tuple[int, ...]


@dataclass(frozen=True)
class Write:
    """Writes into rows tagged by the immediately preceding Compare."""
    cols: tuple[int, ...]
    bits: tuple[int, ...]


@dataclass(frozen=True)
class HostInit:
    """Uncharged host write of a constant into whole columns."""
    cols: tuple[int, ...]
    value: int
    note: str = ""


@dataclass
class FieldLayout:
    m: int
    fields: dict[str, range]

    @property
    def total_columns(self) -> int:
        return sum(len(r) for r in self.fields.values())

    @property
    def end(self) -> int:
        return max(r.stop for r in self.fields.values())

    def __getitem__(self, name: str) -> range:
        return self.fields[name]


@dataclass
class MicroProgram:
    op: OpKind
    m: int
    layout: FieldLayout
    steps: list = field(default_factory=list)
    _km: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def passes(self) -> int:
        return sum(1 for s in self.steps if isinstance(s, Compare))

    def keymasks(self, width: int) -> list:
        """Steps with compare/write patterns materialised as full-width KeyMasks."""
        if width not in self._km:
            out = []
            for s in self.steps:
                if isinstance(s, (Compare, Write)):
                    out.append((s, KeyMask.sparse(width, dict(zip(s.cols, s.bits)))))
                else:
                    out.append((s, None))
            self._km[width] = out
        return self._km[width]


@dataclass
class Stats:
    compare_cycles: int = 0
    write_cycles: int = 0
    readout_cycles: int = 0
    compare_cell_evals: int = 0
    writes_per_cell: np.ndarray | None = None
    flips_per_cell: np.ndarray | None = None

    @property
    def total_cycles(self) -> int:
        return self.compare_cycles + self.write_cycles + self.readout_cycles

    @property
    def writes_total(self) -> int:
        return 0 if self.writes_per_cell is None else int(self.writes_per_cell.sum())

    @property
    def flips_total(self) -> int:
        return 0 if self.flips_per_cell is None else int(self.flips_per_cell.sum())

    @property
    def max_cell_writes(self) -> int:
        return 0 if self.writes_per_cell is None else int(self.writes_per_cell.max(initial=0))

    def __add__(self, other: "Stats") -> "Stats":
        def add(a, b):
            if a is None:
                return None if b is None else b.copy()
            return a.copy() if b is None else a + b
        return Stats(self.compare_cycles + other.compare_cycles,
                     self.write_cycles + other.write_cycles,
                     self.readout_cycles + other.readout_cycles,
                     self.compare_cell_evals + other.compare_cell_evals,
                     add(self.writes_per_cell, other.writes_per_cell),
                     add(self.flips_per_cell, other.flips_per_cell))


# --- emission -------------------------------------------------------------

class _Builder:
    def __init__(self, layout: FieldLayout, minimize: bool):
        self.layout = layout
        self.minimize = minimize
        self.steps: list = []

    def init(self, cols, value, note=""):
        self.steps.append(HostInit(tuple(cols), value, note))

    def pass_(self, cmp: Mapping[int, int], wr: Mapping[int, int]):
        self.steps.append(Compare(tuple(cmp), tuple(cmp.values())))
        self.steps.append(Write(tuple(wr), tuple(wr.values())))

    def lut(self, name: str, binding: Mapping[str, int]):
        sched = slice_schedule(name, self.minimize)
        for p in sched.passes:
            cmp = {binding[v]: d for v, d in zip(sched.columns, p.cube) if d != lut.X}
            wr = {binding[v]: d for v, d in zip(p.targets, p.write)}
            self.pass_(cmp, wr)

    def increment(self, carry: int, cols: list[int]):
        """Add the carry bit into the segment ``cols`` (carry discarded at the top).

        One pass per possible run of trailing ones; the cubes are disjoint so
        the passes are order-free.
        """
        for k in range(len(cols)):
            cmp = {carry: 1, **{c: 1 for c in cols[:k]}, cols[k]: 0}
            wr = {**{c: 0 for c in cols[:k]}, cols[k]: 1, carry: 0}
            self.pass_(cmp, wr)
        self.pass_({carry: 1, **{c: 1 for c in cols}}, {**{c: 0 for c in cols}, carry: 0})


_FIELDS = {
    OpKind.NOT: (("A", 1), ("R", 1)),
    OpKind.AND: (("A", 1), ("B", 1), ("R", 1)),
    OpKind.OR: (("A", 1), ("B", 1), ("R", 1)),
    OpKind.XOR: (("A", 1), ("B", 1), ("R", 1)),
    OpKind.ADD_IP: (("A", 1), ("B", 1), ("C", 0)),
    OpKind.SUB_IP: (("A", 1), ("B", 1), ("C", 0)),
    OpKind.ADD_OOP: (("A", 1), ("B", 1), ("R", 1), ("C", 0)),
    OpKind.SUB_OOP: (("A", 1), ("B", 1), ("R", 1), ("C", 0)),
    OpKind.NEG_OOP: (("A", 1), ("R", 1), ("F", 0)),
    OpKind.ABS_OOP: (("A", 1), ("R", 1), ("F", 0)),
    OpKind.MUL_U: (("A", 1), ("B", 1), ("R", 2)),
    OpKind.MUL_S: (("A", 1), ("B", 1), ("R", 2), ("C", 0), ("EXT", 4)),
    OpKind.MAC_U: (("A", 1), ("B", 1), ("R", 2), ("C", 0)),
    OpKind.MAC_S: (("A", 1), ("B", 1), ("R", 2), ("C", 0), ("EXT", 4)),
}

# fields the op reads as operands, and the field holding its result
OPERANDS = {
    **{op: ("A", "B") for op in OpKind},
    OpKind.NOT: ("A",), OpKind.NEG_OOP: ("A",), OpKind.ABS_OOP: ("A",),
    OpKind.MAC_U: ("A", "B", "R"), OpKind.MAC_S: ("A", "B", "R"),
}
RESULT = {**{op: "R" for op in OpKind}, OpKind.ADD_IP: "B", OpKind.SUB_IP: "B"}


def field_widths(op: OpKind, m: int) -> dict[str, int]:
    """Width of every field; single-column fields have multiplier 0."""
    out = {}
    for name, mult in _FIELDS[op]:
        if name == "EXT":
            out[name] = 4 * m + 3  # reserved sign-extension workspace, sized to the published area
        else:
            out[name] = mult * m if mult else 1
    return out


def make_layout(op: OpKind, m: int, base: Mapping[str, int] | None = None, offset: int = 0) -> FieldLayout:
    """Pack fields from ``offset``; ``base`` pins individual fields to start columns."""
    fields = {}
    pos = offset
    for name, width in field_widths(op, m).items():
        start = base[name] if base and name in base else pos
        fields[name] = range(start, start + width)
        if not (base and name in base):
            pos += width
    return FieldLayout(m, fields)


def emit(op: OpKind | str, m: int, base: Mapping[str, int] | None = None, offset: int = 0,
         minimize: bool = False) -> tuple[FieldLayout, MicroProgram]:
    op = OpKind.parse(op) if isinstance(op, str) else op
    if m < 1 or (op in SIGNED and m < 2):
        raise ContractError(f"{op.value} does not support m={m}")
    layout = make_layout(op, m, base, offset)
    b = _Builder(layout, minimize)
    A = list(layout["A"])
    B = list(layout["B"]) if "B" in layout.fields else None
    R = list(layout["R"]) if "R" in layout.fields else None
    C = layout["C"][0] if "C" in layout.fields else None
    F = layout["F"][0] if "F" in layout.fields else None

    if op in (OpKind.NOT,):
        b.init(R, 0, "zero result")
        for i in range(m):
            b.lut("not", {"a": A[i], "r": R[i]})
    elif op in (OpKind.AND, OpKind.OR, OpKind.XOR):
        b.init(R, 0, "zero result")
        for i in range(m):
            b.lut(op.value.lower(), {"a": A[i], "b": B[i], "r": R[i]})
    elif op in (OpKind.ADD_IP, OpKind.SUB_IP):
        b.init([C], int(op is OpKind.SUB_IP), "carry in")
        name = op.value.lower()
        for i in range(m):
            b.lut(name, {"a": A[i], "b": B[i], "c": C})
    elif op in (OpKind.ADD_OOP, OpKind.SUB_OOP):
        b.init(R, 0, "zero result")
        b.init([C], int(op is OpKind.SUB_OOP), "carry in")
        name = op.value.lower()
        for i in range(m):
            b.lut(name, {"a": A[i], "b": B[i], "r": R[i], "c": C})
    elif op is OpKind.NEG_OOP:
        b.init(R, 0, "zero result")
        b.init([F], 0, "clear flag")
        for i in range(m):
            b.lut("neg", {"a": A[i], "f": F, "r": R[i]})
    elif op is OpKind.ABS_OOP:
        b.init(R, 0, "zero result")
        b.init([F], 0, "clear flag")
        for i in range(m - 1):
            b.lut("abs", {"a": A[i], "f": F, "s": A[m - 1], "r": R[i]})
        b.lut("abs_top", {"s": A[m - 1], "f": F, "r": R[m - 1]})
    elif op is OpKind.MUL_U:
        _emit_mul_u(b, m, A, B, R)
    elif op is OpKind.MAC_U:
        b.init([C], 0, "clear carry")
        for j in range(m):
            _partial_add(b, "padd", A, R, j, C, B[j])
            b.increment(C, R[j + m:])
    elif op in (OpKind.MUL_S, OpKind.MAC_S):
        _emit_signed(b, op, m, A, B, R, C)
    return layout, MicroProgram(op, m, layout, b.steps)


def _partial_add(b: _Builder, table: str, X, R, offset: int, carry: int, pred: int):
    for i in range(len(X)):
        b.lut(table, {"x": X[i], "r": R[i + offset], "c": carry, "p": pred})


def _emit_mul_u(b: _Builder, m: int, A, B, R):
    b.init(R, 0, "zero result")
    for i in range(m):
        b.lut("and", {"a": A[i], "b": B[0], "r": R[i]})
    # the top result bit stays 0 until the last row of partial products, so it carries
    top = R[2 * m - 1]
    for j in range(1, m):
        _partial_add(b, "padd", A, R, j, top, B[j])
        if j < m - 1:
            b.pass_({top: 1}, {R[j + m]: 1, top: 0})


def _emit_signed(b: _Builder, op: OpKind, m: int, A, B, R, C):
    # A*B = A_u*B_u - 2^m (a_s B_u + b_s A_u) mod 2^2m; the last partial product is
    # subtracted and the remaining correction is one predicated subtract of B.
    accumulate = op is OpKind.MAC_S
    if not accumulate:
        b.init(R, 0, "zero result")
    b.init([C], 0, "clear carry")
    for j in range(m - 1):
        if j == 0 and not accumulate:
            for i in range(m):
                b.lut("and", {"a": A[i], "b": B[0], "r": R[i]})
            continue
        _partial_add(b, "padd", A, R, j, C, B[j])
        if accumulate:
            b.increment(C, R[j + m:])
        else:
            b.pass_({C: 1}, {R[j + m]: 1, C: 0})
    sb, sa = B[m - 1], A[m - 1]
    b.pass_({sb: 1}, {C: 1})
    _partial_add(b, "padd_not", A, R, m - 1, C, sb)
    b.lut("padd_one", {"r": R[2 * m - 1], "c": C, "p": sb})
    b.pass_({}, {C: 0})
    b.pass_({sa: 1}, {C: 1})
    _partial_add(b, "padd_not", B, R, m, C, sa)


# --- execution ---------------------------------------------------------------

def run(cam: CamArray, program: MicroProgram) -> Stats:
    if program.layout.end > cam.cols:
        raise ContractError(f"program needs {program.layout.end} columns, CAM has {cam.cols}")
    w0 = cam.write_counts.copy()
    f0 = cam.flip_counts.copy()
    st = Stats()
    rows = cam.rows
    for step, km in program.keymasks(cam.cols):
        if isinstance(step, Compare):
            cam.compare(km)
            st.compare_cycles += 1
            st.compare_cell_evals += rows * len(step.cols)
        elif isinstance(step, Write):
            cam.write(km)
            st.write_cycles += 1
        else:
            cam.fill_columns(step.cols, step.value)
    st.writes_per_cell = cam.write_counts - w0
    st.flips_per_cell = cam.flip_counts - f0
    return st


def measured_vs_model(op: OpKind | str, m: int, rows: int = 32, seed: int = 1) -> dict:
    """Run ``op`` on random rows and compare its cycle count with the published formula."""
    op = OpKind.parse(op) if isinstance(op, str) else op
    layout, prog = emit(op, m)
    cam = CamArray(rows, layout.end)
    rng = np.random.default_rng(seed)
    for name in OPERANDS[op]:
        cols = list(layout[name])
        cam.cells[:, cols] = rng.integers(0, 2, size=(rows, len(cols)), dtype=np.uint8)
    st = run(cam, prog)
    model = table_runtime(op, m)
    return {"op": op.value, "m": m, "measured": st.total_cycles, "model": model,
            "ratio": st.total_cycles / model if model > 0 else float("inf")}


def apply(op: OpKind | str, m: int, a, b=None, r=None, minimize: bool = False):
    """Run ``op`` on host operand lists, one row per element.

    Returns ``(results, stats, cam)``; results are read from the op's result field.
    """
    op = OpKind.parse(op) if isinstance(op, str) else op
    layout, prog = emit(op, m, minimize=minimize)
    a = list(a)
    cam = CamArray(len(a), layout.end)
    given = {"A": a, "B": b, "R": r}
    for name in OPERANDS[op]:
        vals = given[name]
        if vals is None:
            raise ContractError(f"{op.value} needs operand {name}")
        if len(vals) != len(a):
            raise ContractError("operand lengths differ")
        cam.load_field(layout[name], vals)
    st = run(cam, prog)
    return cam.read_all(layout[RESULT[op]]), st, cam
