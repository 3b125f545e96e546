"""Truth table -> ordered compare/write pass schedule.

Every pass does a fresh compare; a row rewritten by one pass can be matched
again by a later one. The scheduler orders passes so that never happens, and
when the precedence relation has a cycle it falls back to writing shadow
columns first and copying them back afterwards.

Digits are stored LSB-first: ``inputs[0]`` is the least significant variable.
The text and JSON formats list variables MSB-left, like a printed table.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from apsim.cam import ContractError

X = -1  # don't-care digit in a compare cube


class TableError(ValueError):
    """Malformed truth table (missing/duplicate rows, bad digits, bad header)."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True)
class TruthTable:
    radix: int
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    rows: Mapping[tuple[int, ...], tuple[int, ...]]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.radix < 2:
            raise TableError(f"radix must be >= 2, got {self.radix}")
        if len(set(self.inputs)) != len(self.inputs) or len(set(self.outputs)) != len(self.outputs):
            raise TableError("variable names must be unique")
        k, r = len(self.inputs), self.radix
        problems = []
        for key, out in self.rows.items():
            if len(key) != k or any(not 0 <= d < r for d in key):
                problems.append(f"bad assignment {key}")
            if len(out) != len(self.outputs) or any(not 0 <= d < r for d in out):
                problems.append(f"bad output {out} for {key}")
        missing = [a for a in itertools.product(range(r), repeat=k) if a not in self.rows]
        if missing:
            problems.append("missing rows: " + ", ".join(format_digits(a) for a in missing[:8]))
        if problems:
            raise TableError("; ".join(problems))

    @classmethod
    def from_function(cls, inputs: Sequence[str], outputs: Sequence[str],
                      fn: Callable[..., Sequence[int]], radix: int = 2, name: str = "") -> "TruthTable":
        """Tabulate ``fn(**{input: digit})`` over every assignment."""
        rows = {}
        for a in itertools.product(range(radix), repeat=len(inputs)):
            out = fn(**dict(zip(inputs, a)))
            rows[a] = tuple(int(d) for d in (out if isinstance(out, (tuple, list)) else (out,)))
        return cls(radix, tuple(inputs), tuple(outputs), rows, name)

    @property
    def in_place(self) -> bool:
        return all(o in self.inputs for o in self.outputs)

    def initial_output(self, assignment: Sequence[int]) -> tuple[int, ...]:
        """Value the output columns hold before any pass runs."""
        pos = {v: i for i, v in enumerate(self.inputs)}
        return tuple(assignment[pos[o]] if o in pos else 0 for o in self.outputs)


@dataclass(frozen=True)
class Transition:
    """One pass: tag rows matching ``cube`` (over ``columns``), write ``write`` to ``targets``."""

    cube: tuple[int, ...]
    targets: tuple[str, ...]
    write: tuple[int, ...]
    label: int | None = None

    def key(self) -> tuple:
        # LSB-first numeric value with X as 0, don't-care pattern as tiebreak
        val = sum(max(d, 0) * (1 << (8 * i)) for i, d in enumerate(self.cube))
        xs = sum(1 << i for i, d in enumerate(self.cube) if d == X)
        return (val, xs, self.write)


@dataclass(frozen=True)
class LutSchedule:
    radix: int
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    columns: tuple[str, ...]
    passes: tuple[Transition, ...]
    scratch_columns: int = 0
    in_place: bool = False
    source: str = ""

    def __len__(self):
        return len(self.passes)

    def to_json(self) -> str:
        def rev(seq):
            return list(seq)[::-1]

        def digits(seq):
            return "".join("X" if d == X else _digit_char(d) for d in reversed(seq))

        doc = {
            "radix": self.radix,
            "source": self.source,
            "inputs": rev(self.inputs),
            "outputs": rev(self.outputs),
            "columns": rev(self.columns),
            "in_place": self.in_place,
            "scratch_columns": self.scratch_columns,
            "passes": [
                {"compare": digits(p.cube), "write": digits(p.write), "targets": rev(p.targets)}
                for p in self.passes
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "LutSchedule":
        doc = json.loads(text)
        r = int(doc["radix"])

        def parse(s):
            return tuple(X if c == "X" else _char_digit(c, r) for c in reversed(s))

        passes = tuple(
            Transition(parse(p["compare"]), tuple(reversed(p["targets"])), parse(p["write"]), i + 1)
            for i, p in enumerate(doc["passes"])
        )
        return cls(r, tuple(reversed(doc["inputs"])), tuple(reversed(doc["outputs"])),
                   tuple(reversed(doc["columns"])), passes, int(doc["scratch_columns"]),
                   bool(doc["in_place"]), doc.get("source", ""))


@dataclass
class HazardGraph:
    table: TruthTable
    nodes: list[Transition]
    # (u, v): u's written state lands inside v's cube, so v must run before u
    edges: set[tuple[int, int]] = field(default_factory=set)

    def precedences(self) -> set[tuple[Transition, Transition]]:
        return {(self.nodes[v], self.nodes[u]) for u, v in self.edges}


@dataclass
class VerificationReport:
    passed: bool
    mismatches: list[tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]]
    transition_counts: dict[tuple[int, ...], int]

    @property
    def transitioned(self) -> int:
        return sum(1 for c in self.transition_counts.values() if c > 0)

    @property
    def multiply_transitioned(self) -> list[tuple[int, ...]]:
        return [a for a, c in self.transition_counts.items() if c > 1]

    def describe(self) -> str:
        if self.passed:
            return f"ok: {self.transitioned}/{len(self.transition_counts)} assignments transition"
        lines = []
        for a, want, got in self.mismatches:
            lines.append(f"assignment {format_digits(a)}: expected {format_digits(want)}, got {format_digits(got)}"
                         f" after {self.transition_counts[a]} transitions")
        for a in self.multiply_transitioned:
            if all(a != m[0] for m in self.mismatches):
                lines.append(f"assignment {format_digits(a)} transitioned {self.transition_counts[a]} times")
        return "\n".join(lines)


def _digit_char(d: int) -> str:
    return "0123456789abcdefghijklmnopqrstuvwxyz"[d]


def _char_digit(c: str, radix: int) -> int:
    d = int(c, 36)
    if d >= radix:
        raise ValueError(f"digit {c!r} out of range for radix {radix}")
    return d


def format_digits(seq: Sequence[int]) -> str:
    """Render an LSB-first digit tuple MSB-left."""
    return "".join("X" if d == X else _digit_char(d) for d in reversed(seq))


def _expand(cube: Sequence[int], radix: int) -> Iterable[tuple[int, ...]]:
    choices = [range(radix) if d == X else (d,) for d in cube]
    return itertools.product(*choices)


def _matches(cube: Sequence[int], state: Sequence[int]) -> bool:
    return all(c == X or c == s for c, s in zip(cube, state))


def _apply(t: Transition, state: tuple[int, ...], columns: Sequence[str]) -> tuple[int, ...]:
    out = list(state)
    pos = {v: i for i, v in enumerate(columns)}
    for name, d in zip(t.targets, t.write):
        if name in pos:
            out[pos[name]] = d
    return tuple(out)


def build_transitions(table: TruthTable) -> list[Transition]:
    """One transition per row whose output differs from what the columns already hold."""
    result = []
    for a in itertools.product(range(table.radix), repeat=len(table.inputs)):
        out = table.rows[a]
        if out != table.initial_output(a):
            result.append(Transition(a, table.outputs, out))
    return result


def build_hazard_graph(transitions: Sequence[Transition], table: TruthTable) -> HazardGraph:
    nodes = list(transitions)
    graph = HazardGraph(table, nodes)
    for u, tu in enumerate(nodes):
        posts = {_apply(tu, s, table.inputs) for s in _expand(tu.cube, table.radix)}
        for v, tv in enumerate(nodes):
            if u != v and any(_matches(tv.cube, s) for s in posts):
                graph.edges.add((u, v))
    return graph


def schedule_passes(graph: HazardGraph) -> LutSchedule:
    table = graph.table
    n = len(graph.nodes)
    succ: dict[int, list[int]] = {i: [] for i in range(n)}
    indeg = [0] * n
    for u, v in graph.edges:
        succ[v].append(u)
        indeg[u] += 1
    heap = [(graph.nodes[i].key(), i) for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, i = heapq.heappop(heap)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, (graph.nodes[j].key(), j))
    if len(order) == n:
        passes = tuple(replace(graph.nodes[i], label=k + 1) for k, i in enumerate(order))
        return LutSchedule(table.radix, table.inputs, table.outputs, table.inputs, passes,
                           0, table.in_place, table.name)
    return _shadow_schedule(table)


def _shadow_schedule(table: TruthTable) -> LutSchedule:
    """Order-free fallback: compute into zeroed shadows, then copy back."""
    r = table.radix
    in_place = [o for o in table.outputs if o in table.inputs]
    shadow = {o: f"{o}'" for o in in_place}
    columns = table.inputs + tuple(shadow[o] for o in in_place)
    targets = tuple(shadow.get(o, o) for o in table.outputs)
    phase1 = []
    for a in itertools.product(range(r), repeat=len(table.inputs)):
        out = table.rows[a]
        if any(out):
            phase1.append(Transition(a + (X,) * len(in_place), targets, out))
    phase1.sort(key=Transition.key)
    phase2 = []
    for o in in_place:
        for d in range(r):
            cube = tuple(d if c == shadow[o] else X for c in columns)
            phase2.append(Transition(cube, (o,), (d,)))
    passes = tuple(replace(t, label=k + 1) for k, t in enumerate(phase1 + phase2))
    return LutSchedule(r, table.inputs, table.outputs, columns, passes,
                       len(in_place), table.in_place, table.name)


def merge_cubes(transitions: Sequence[Transition], radix: int = 2) -> list[Transition]:
    """Greedily fold cubes that differ in one digit (and cover every value of it) into X."""
    current = sorted(transitions, key=Transition.key)
    changed = True
    while changed:
        changed = False
        used = set()
        merged = []
        for i, t in enumerate(current):
            if i in used:
                continue
            done = False
            for pos in range(len(t.cube)):
                if t.cube[pos] == X:
                    continue
                group = {t.cube[pos]: i}
                for j, u in enumerate(current):
                    if j == i or j in used or u.write != t.write or u.targets != t.targets:
                        continue
                    if u.cube[pos] != X and all(a == b for k, (a, b) in enumerate(zip(t.cube, u.cube)) if k != pos):
                        group.setdefault(u.cube[pos], j)
                if len(group) == radix:
                    used.update(group.values())
                    cube = t.cube[:pos] + (X,) + t.cube[pos + 1:]
                    merged.append(Transition(cube, t.targets, t.write))
                    done = changed = True
                    break
            if not done:
                used.add(i)
                merged.append(t)
        current = sorted(merged, key=Transition.key)
    return current


def compile_table(table: TruthTable, minimize: bool = False) -> LutSchedule:
    transitions = build_transitions(table)
    if minimize:
        transitions = merge_cubes(transitions, table.radix)
    return schedule_passes(build_hazard_graph(transitions, table))


def verify_schedule(schedule: LutSchedule, table: TruthTable) -> VerificationReport:
    """Run the schedule on one row per input assignment, all rows at once."""
    if schedule.inputs != table.inputs or schedule.outputs != table.outputs or schedule.radix != table.radix:
        raise ContractError("schedule layout does not match the truth table")
    r, k = table.radix, len(table.inputs)
    assignments = list(itertools.product(range(r), repeat=k))
    names = list(schedule.columns) + [o for o in table.outputs if o not in schedule.columns]
    for p in schedule.passes:
        names += [t for t in p.targets if t not in names]
    col = {v: i for i, v in enumerate(names)}
    state = np.zeros((len(assignments), len(names)), dtype=np.int16)
    state[:, :k] = np.array(assignments, dtype=np.int16).reshape(len(assignments), k)
    counts = np.zeros(len(assignments), dtype=np.int64)
    ccols = np.arange(len(schedule.columns))
    for p in schedule.passes:
        care = ccols[np.array(p.cube) != X]
        key = np.array(p.cube)[care]
        tags = np.all(state[:, care] == key, axis=1) if care.size else np.ones(len(assignments), bool)
        counts += tags
        for name, d in zip(p.targets, p.write):
            state[tags, col[name]] = d
    mismatches = []
    for i, a in enumerate(assignments):
        got = tuple(int(state[i, col[o]]) for o in table.outputs)
        if got != table.rows[a]:
            mismatches.append((a, table.rows[a], got))
    tc = {a: int(c) for a, c in zip(assignments, counts)}
    single = schedule.scratch_columns > 0 or int(counts.max(initial=0)) <= 1
    return VerificationReport(not mismatches and single, mismatches, tc)


def parse_table(text: str, name: str = "") -> TruthTable:
    """Parse the line-based ``radix/inputs/outputs/row`` format."""
    radix = inputs = outputs = None
    rows: dict[tuple[int, ...], tuple[int, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        if word == "radix":
            try:
                radix = int(rest)
            except ValueError:
                raise TableError(f"bad radix {rest!r}", lineno) from None
            if radix < 2:
                raise TableError("radix must be >= 2", lineno)
        elif word == "inputs":
            inputs = tuple(s.strip() for s in rest.split(","))[::-1]
        elif word == "outputs":
            outputs = tuple(s.strip() for s in rest.split(","))[::-1]
        elif word == "row":
            if radix is None or inputs is None or outputs is None:
                raise TableError("row before radix/inputs/outputs header", lineno)
            lhs, arrow, rhs = rest.partition("->")
            lhs, rhs = lhs.replace(" ", ""), rhs.replace(" ", "")
            if not arrow or len(lhs) != len(inputs) or len(rhs) != len(outputs):
                raise TableError(f"malformed row {rest!r}", lineno)
            try:
                a = tuple(_char_digit(c, radix) for c in reversed(lhs))
                o = tuple(_char_digit(c, radix) for c in reversed(rhs))
            except ValueError as e:
                raise TableError(str(e), lineno) from None
            if a in rows:
                raise TableError(f"duplicate row {lhs}", lineno)
            rows[a] = o
        else:
            raise TableError(f"unknown directive {word!r}", lineno)
    if radix is None or inputs is None or outputs is None:
        raise TableError("missing radix/inputs/outputs header")
    missing = [a for a in itertools.product(range(radix), repeat=len(inputs)) if a not in rows]
    if missing:
        raise TableError("missing rows: " + ", ".join(format_digits(a) for a in missing))
    return TruthTable(radix, inputs, outputs, rows, name)


def format_table(table: TruthTable) -> str:
    lines = [f"radix {table.radix}",
             "inputs " + ",".join(reversed(table.inputs)),
             "outputs " + ",".join(reversed(table.outputs))]
    for a in itertools.product(range(table.radix), repeat=len(table.inputs)):
        lines.append(f"row {format_digits(a)} -> {format_digits(table.rows[a])}")
    return "\n".join(lines) + "\n"
