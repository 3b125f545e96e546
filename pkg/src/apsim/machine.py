"""The associative processor: CAM, controller, interconnect and SIMD kernels.

Kernels take host data, load it (free), run micro-programs and interconnect
moves (charged), and read results back (free). Every charged step is folded
into ``ApMachine.stats``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from apsim.cam import CamArray, ContractError, KeyMask
from apsim.isa import OpKind, Stats, emit, run


@dataclass
class Interconnect:
    max_offset: int
    bit_serial: bool = True

    def cost(self, width: int) -> int:
        return width if self.bit_serial else 1


@dataclass
class KernelResult:
    outputs: list
    cycles: int
    reduction_rounds: int = 0
    writes: int = 0


class ApMachine:
    def __init__(self, rows: int, cols: int, clock_hz: float = 1e9, bit_serial_shift: bool = True):
        self.cam = CamArray(rows, cols)
        self.clock_hz = clock_hz
        self.interconnect = Interconnect(rows, bit_serial_shift)
        self.stats = Stats()

    @property
    def rows(self) -> int:
        return self.cam.rows

    def _record(self, st: Stats) -> Stats:
        self.stats = self.stats + st
        return st

    def execute(self, program) -> Stats:
        return self._record(run(self.cam, program))

    def run_op(self, op: OpKind | str, m: int, base=None, offset: int = 0) -> Stats:
        _, prog = emit(op, m, base=base, offset=offset)
        return self.execute(prog)

    def search(self, cols: Sequence[int], bits: Sequence[int], readout: bool = False) -> int:
        """One compare cycle; returns the tag popcount (a free peripheral read)."""
        km = KeyMask.sparse(self.cam.cols, dict(zip(cols, bits)))
        tags = self.cam.compare(km)
        self._record(Stats(compare_cycles=1, readout_cycles=int(readout),
                           compare_cell_evals=self.rows * len(cols)))
        return tags.popcount

    def shift_field(self, field: range, offset: int, dest: range | None = None,
                    window: tuple[int, int] | None = None) -> Stats:
        """Move ``field`` of row i into ``dest`` of row i + offset.

        Vacated rows are zero-filled. With a ``window`` only rows inside it
        take part; every other row's destination is written with zeros.
        """
        rows = self.rows
        if abs(offset) >= rows:
            raise ContractError(f"shift offset {offset} out of range for {rows} rows")
        dest = field if dest is None else dest
        self.cam._check_field(field)
        self.cam._check_field(dest)
        if len(dest) != len(field):
            raise ContractError("source and destination fields differ in width")
        if offset == 0 and dest == field and window is None:
            return self._record(Stats())
        lo, hi = window if window is not None else (0, rows)
        if not 0 <= lo < hi <= rows:
            raise ContractError(f"bad window {window}")
        src = self.cam.cells[:, list(field)].copy()
        new = np.zeros_like(src)
        d_lo, d_hi = max(lo, lo + offset), min(hi, hi + offset)
        if d_lo < d_hi:
            new[d_lo:d_hi] = src[d_lo - offset:d_hi - offset]
        cols = list(dest)
        old = self.cam.cells[:, cols]
        w = np.zeros_like(self.cam.write_counts)
        f = np.zeros_like(self.cam.flip_counts)
        w[:, cols] = 1
        f[:, cols] = old != new
        self.cam.cells[:, cols] = new
        self.cam.write_counts += w
        self.cam.flip_counts += f
        return self._record(Stats(write_cycles=self.interconnect.cost(len(field)),
                                  writes_per_cell=w, flips_per_cell=f))


def _pow2_at_least(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _delta(before: Stats, after: Stats) -> tuple[int, int]:
    writes = after.writes_total - before.writes_total
    return after.total_cycles - before.total_cycles, writes


def reduce_sum(ap: ApMachine, field: range, n: int, temp: range | None = None,
               carry: int | None = None, start: int = 0) -> KernelResult:
    """Tree-sum ``field`` over rows ``start .. start+n``; row ``start`` receives the total.

    A ragged ``n`` is padded with zero rows up to the next power of two. The
    sum wraps modulo ``2**len(field)``.
    """
    if n < 1:
        raise ContractError("reduce_sum needs n >= 1")
    w = len(field)
    cols = ap.cam.cols
    if temp is None:
        temp = range(cols - w - 1, cols - 1)
    if carry is None:
        carry = temp.stop
    if set(temp) & set(field) or carry in field or carry in temp:
        raise ContractError("reduction scratch overlaps the summed field")
    p = _pow2_at_least(n)
    if start + p > ap.rows:
        raise ContractError(f"need {p} rows from {start}, machine has {ap.rows}")
    for r in range(start + n, start + p):
        for c in field:
            ap.cam.cells[r, c] = 0
    before = ap.stats
    _, add = emit(OpKind.ADD_IP, w, base={"A": temp.start, "B": field.start, "C": carry})
    rounds = 0
    s = p // 2
    while s >= 1:
        ap.shift_field(field, -s, dest=temp, window=(start, start + p))
        ap.execute(add)
        rounds += 1
        s //= 2
    cycles, writes = _delta(before, ap.stats)
    return KernelResult([ap.cam.read_field(field, start)], cycles, rounds, writes)


def _load(ap: ApMachine, field: range, values: Sequence[int]):
    vals = list(values) + [0] * (ap.rows - len(values))
    ap.cam.load_field(field, vals)


def _check_n(ap: ApMachine, n: int):
    if n < 1 or n > ap.rows:
        raise ContractError(f"{n} elements do not fit {ap.rows} rows")


def vector_add(ap: ApMachine, a: Sequence[int], b: Sequence[int], m: int) -> KernelResult:
    """Elementwise ``(a + b) mod 2**m``; cost depends only on ``m``."""
    return _elementwise(ap, OpKind.ADD_OOP, a, b, m)


def vector_mul(ap: ApMachine, a: Sequence[int], b: Sequence[int], m: int) -> KernelResult:
    """Elementwise 2m-bit unsigned products."""
    return _elementwise(ap, OpKind.MUL_U, a, b, m)


def _elementwise(ap, op, a, b, m):
    if len(a) != len(b):
        raise ContractError("operand lengths differ")
    _check_n(ap, len(a))
    layout, prog = emit(op, m)
    _load(ap, layout["A"], [x % (1 << m) for x in a])
    _load(ap, layout["B"], [x % (1 << m) for x in b])
    before = ap.stats
    ap.execute(prog)
    cycles, writes = _delta(before, ap.stats)
    out = ap.cam.read_all(layout["R"])[:len(a)]
    return KernelResult(out, cycles, 0, writes)


def dot(ap: ApMachine, a: Sequence[int], b: Sequence[int], m: int) -> KernelResult:
    """Unsigned dot product, modulo ``2**(2m)``."""
    if len(a) != len(b):
        raise ContractError("operand lengths differ")
    n = len(a)
    _check_n(ap, _pow2_at_least(n))
    layout, prog = emit(OpKind.MUL_U, m)
    _load(ap, layout["A"], a)
    _load(ap, layout["B"], b)
    before = ap.stats
    ap.execute(prog)
    R = layout["R"]
    temp = range(layout.end, layout.end + len(R))
    red = reduce_sum(ap, R, n, temp=temp, carry=temp.stop)
    cycles, writes = _delta(before, ap.stats)
    return KernelResult(red.outputs, cycles, red.reduction_rounds, writes)


def vmm(ap: ApMachine, matrix: Sequence[Sequence[int]], vector: Sequence[int], m: int) -> KernelResult:
    """``matrix @ vector`` with one matrix row per block of rows.

    All products are formed by one parallel multiply; the blocks are then
    reduced one after another, which is what makes the cost grow as
    n log n.
    """
    n = len(vector)
    if len(matrix) != n or any(len(row) != n for row in matrix):
        raise ContractError("vmm needs an n x n matrix and an n-vector")
    p = _pow2_at_least(n)
    if n * p > ap.rows:
        raise ContractError(f"vmm with n={n} needs {n * p} rows")
    layout, prog = emit(OpKind.MUL_U, m)
    a = [0] * ap.rows
    b = [0] * ap.rows
    for r in range(n):
        for c in range(n):
            a[r * p + c] = matrix[r][c]
            b[r * p + c] = vector[c]
    ap.cam.load_field(layout["A"], a)
    ap.cam.load_field(layout["B"], b)
    before = ap.stats
    ap.execute(prog)
    R = layout["R"]
    temp = range(layout.end, layout.end + len(R))
    out, rounds = [], 0
    for r in range(n):
        red = reduce_sum(ap, R, n, temp=temp, carry=temp.stop, start=r * p)
        out.append(red.outputs[0])
        rounds += red.reduction_rounds
    cycles, writes = _delta(before, ap.stats)
    return KernelResult(out, cycles, rounds, writes)


def mmm(ap: ApMachine, amat: Sequence[Sequence[int]], bmat: Sequence[Sequence[int]], m: int) -> KernelResult:
    """``amat @ bmat`` as one vector-matrix multiply per column of ``bmat``."""
    n = len(amat)
    if len(bmat) != n or any(len(r) != n for r in list(amat) + list(bmat)):
        raise ContractError("mmm needs two n x n matrices")
    cols_out, cycles, rounds, writes = [], 0, 0, 0
    for j in range(n):
        res = vmm(ap, amat, [bmat[i][j] for i in range(n)], m)
        cols_out.append(res.outputs)
        cycles += res.cycles
        rounds += res.reduction_rounds
        writes += res.writes
    out = [[cols_out[j][i] for j in range(n)] for i in range(n)]
    return KernelResult(out, cycles, rounds, writes)


def histogram(ap: ApMachine, values: Sequence[int], bins: Sequence[int], m: int) -> KernelResult:
    """Count exact matches per bin: one compare and one tag-count readout per bin."""
    _check_n(ap, len(values))
    field = range(0, m)
    valid = m
    _load(ap, field, values)
    _load(ap, range(valid, valid + 1), [1] * len(values))
    before = ap.stats
    counts = []
    for k in bins:
        bits = [(k >> i) & 1 for i in range(m)] + [1]
        counts.append(ap.search(list(field) + [valid], bits, readout=True))
    cycles, writes = _delta(before, ap.stats)
    return KernelResult(counts, cycles, 0, writes)


def membership(ap: ApMachine, values: Sequence[int], query: int, m: int) -> bool:
    """True iff ``query`` is stored in some row; a single compare cycle."""
    _check_n(ap, len(values))
    _load(ap, range(0, m), values)
    _load(ap, range(m, m + 1), [1] * len(values))
    bits = [(query >> i) & 1 for i in range(m)] + [1]
    return ap.search(list(range(m + 1)), bits) > 0


def filter1d(ap: ApMachine, signal: Sequence[int], taps: Sequence[int], m: int) -> KernelResult:
    """Causal FIR: ``y[i] = sum_j taps[j] * x[i - j]`` modulo ``2**(2m)``."""
    n, w = len(signal), len(taps)
    if w > n:
        raise ContractError(f"{w} taps exceed {n} samples")
    _check_n(ap, n)
    layout, mac = emit(OpKind.MAC_U, m)
    X = range(layout.end, layout.end + m)
    _load(ap, X, signal)
    _load(ap, layout["R"], [])
    before = ap.stats
    for j, t in enumerate(taps):
        ap.shift_field(X, j, dest=layout["A"])
        ap.cam.load_field(layout["B"], [t] * ap.rows)
        ap.execute(mac)
    cycles, writes = _delta(before, ap.stats)
    return KernelResult(ap.cam.read_all(layout["R"])[:n], cycles, 0, writes)
