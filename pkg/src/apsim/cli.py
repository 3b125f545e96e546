"""Command-line front end.

Exit codes: 0 success, 2 parse/validation failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from apsim import cost, isa, lut, machine
from apsim.cam import ContractError
from apsim.rng import SplitMix64

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 2, 3

KERNELS = ("vector_add", "vector_mul", "dot", "reduce_sum", "vmm", "mmm",
           "histogram", "membership", "filter1d")
MAX_BITS = 64
BENCH_WIDTHS = (4, 8, 16, 32, 64)


@dataclass
class RunConfig:
    name: str
    is_kernel: bool
    n: int
    m: int
    tech: str
    clock_hz: float = 1e9
    minimize: bool = False
    seed: int = 0
    out: str | None = None
    bins: int | None = None
    taps: int | None = None

    def validate(self):
        if self.is_kernel:
            if self.name not in KERNELS:
                raise ContractError(f"unknown kernel {self.name!r}; expected one of {', '.join(KERNELS)}")
        else:
            isa.OpKind.parse(self.name)
        if self.n < 1:
            raise ContractError("--n must be >= 1")
        if not 1 <= self.m <= MAX_BITS:
            raise ContractError(f"--bits {self.m} overflows the supported 1..{MAX_BITS} range")
        if self.clock_hz <= 0:
            raise ContractError("--clock must be positive")
        cost.preset(self.tech)


def _digest(values) -> str:
    return hashlib.sha256(json.dumps(values, separators=(",", ":")).encode()).hexdigest()


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write_out(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- run ---------------------------------------------------------------------

def _run_op(cfg: RunConfig, g: SplitMix64):
    op = isa.OpKind.parse(cfg.name)
    a = g.operands(cfg.n, cfg.m)
    b = g.operands(cfg.n, cfg.m)
    r = g.operands(cfg.n, 2 * cfg.m) if "R" in isa.OPERANDS[op] else None
    results, st, _ = isa.apply(op, cfg.m, a, b, r, minimize=cfg.minimize)
    return results, st, {"model_cycles": isa.table_runtime(op, cfg.m)}


def _run_kernel(cfg: RunConfig, g: SplitMix64):
    n, m = cfg.n, cfg.m
    extra = {}
    if cfg.name in ("vmm", "mmm"):
        p = 1 << max(0, (n - 1).bit_length())
        ap = machine.ApMachine(n * p, 8 * m + 1)
    else:
        ap = machine.ApMachine(1 << max(0, (n - 1).bit_length()), 8 * m + 1)
    if cfg.name == "vector_add":
        res = machine.vector_add(ap, g.operands(n, m), g.operands(n, m), m)
    elif cfg.name == "vector_mul":
        res = machine.vector_mul(ap, g.operands(n, m), g.operands(n, m), m)
    elif cfg.name == "dot":
        res = machine.dot(ap, g.operands(n, m), g.operands(n, m), m)
    elif cfg.name == "reduce_sum":
        ap.cam.load_field(range(m), g.operands(n, m) + [0] * (ap.rows - n))
        res = machine.reduce_sum(ap, range(m), n)
    elif cfg.name == "vmm":
        mat = [g.operands(n, m) for _ in range(n)]
        res = machine.vmm(ap, mat, g.operands(n, m), m)
    elif cfg.name == "mmm":
        amat = [g.operands(n, m) for _ in range(n)]
        bmat = [g.operands(n, m) for _ in range(n)]
        res = machine.mmm(ap, amat, bmat, m)
    elif cfg.name == "histogram":
        k = cfg.bins or min(1 << m, 16)
        res = machine.histogram(ap, g.operands(n, m), list(range(k)), m)
        extra["bins"] = k
    elif cfg.name == "membership":
        vals = g.operands(n, m)
        hit = machine.membership(ap, vals, g.bits(m), m)
        res = machine.KernelResult([hit], ap.stats.total_cycles, 0, ap.stats.writes_total)
    else:
        w = cfg.taps or min(n, 3)
        res = machine.filter1d(ap, g.operands(n, m), g.operands(w, m), m)
        extra["taps"] = w
    extra["reduction_rounds"] = res.reduction_rounds
    return res.outputs, ap.stats, extra


def run_config(cfg: RunConfig) -> dict:
    cfg.validate()
    g = SplitMix64(cfg.seed)
    if cfg.is_kernel:
        results, st, extra = _run_kernel(cfg, g)
    else:
        results, st, extra = _run_op(cfg, g)
    tech = cost.preset(cfg.tech)
    rep = cost.cost_report(st, tech, cfg.clock_hz)
    doc = {
        "name": cfg.name, "kind": "kernel" if cfg.is_kernel else "op",
        "n": cfg.n, "bits": cfg.m, "tech": tech.name, "clock_hz": cfg.clock_hz,
        "seed": cfg.seed, "minimize": cfg.minimize,
        "cycles": st.total_cycles, "compare_cycles": st.compare_cycles,
        "write_cycles": st.write_cycles, "readout_cycles": st.readout_cycles,
        "writes_total": st.writes_total, "flips_total": st.flips_total,
        "max_cell_writes": st.max_cell_writes,
        "energy_J": rep.energy_J, "time_s": rep.time_s,
        "lifetime_s": rep.lifetime_s if math.isfinite(rep.lifetime_s) else None,
        "lifetime_mean_s": rep.lifetime_mean_s if math.isfinite(rep.lifetime_mean_s) else None,
        "compare_energy_assumed": rep.compare_energy_assumed,
        "results_digest": _digest(results),
    }
    doc.update(extra)
    return doc


def cmd_run(args) -> int:
    cfg = RunConfig(args.op or args.kernel, args.kernel is not None, args.n, args.bits, args.tech,
                    args.clock, args.minimize, args.seed, args.out, args.k, args.taps)
    _write_out(_dump(run_config(cfg)), cfg.out)
    return EXIT_OK


# --- LUT commands ------------------------------------------------------------

def _read_table(path: str) -> lut.TruthTable:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ContractError(str(e)) from e
    return lut.parse_table(text, name=Path(path).stem)


def _check(report: lut.VerificationReport) -> int:
    if report.passed:
        return EXIT_OK
    print(report.describe(), file=sys.stderr)
    return EXIT_VERIFY


def cmd_compile_lut(args) -> int:
    table = _read_table(args.inp)
    sched = lut.compile_table(table, minimize=args.minimize)
    _write_out(sched.to_json(), args.out)
    status = _check(lut.verify_schedule(sched, table))
    if status == EXIT_OK:
        print(f"{len(sched)} passes, {sched.scratch_columns} scratch columns", file=sys.stderr)
    return status


def cmd_verify_lut(args) -> int:
    table = _read_table(args.table)
    try:
        sched = lut.LutSchedule.from_json(Path(args.schedule).read_text())
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise ContractError(f"cannot read schedule: {e}") from e
    status = _check(lut.verify_schedule(sched, table))
    if status == EXIT_OK:
        print("ok", file=sys.stderr)
    return status


# --- bench -------------------------------------------------------------------

def _threads() -> int:
    try:
        return max(1, int(os.environ.get("APSIM_THREADS", "1")))
    except ValueError:
        raise ContractError("APSIM_THREADS must be an integer") from None


def _primitive_row(op: isa.OpKind, m: int) -> dict:
    res = isa.measured_vs_model(op, m, rows=8, seed=m)
    ok = 0.5 * res["model"] <= res["measured"] <= res["model"]
    if op in (isa.OpKind.NOT, isa.OpKind.AND, isa.OpKind.OR):
        ok = res["measured"] == res["model"]
    text = f"{op.value} m={m}: measured {res['measured']}, model {res['model']}, ratio {res['ratio']:.2f}"
    return {"suite": "primitives", "case": f"{op.value} m={m}", "measured": res["measured"],
            "model": res["model"], "ok": ok, "text": text}


def _bench_primitives() -> list[dict]:
    jobs = [(op, m) for op in isa.OpKind for m in BENCH_WIDTHS]
    with ThreadPoolExecutor(_threads()) as pool:
        return list(pool.map(lambda j: _primitive_row(*j), jobs))


def _bench_kernels() -> list[dict]:
    rows = []
    m = 8
    for n in (2, 16, 128, 1024):
        ap = machine.ApMachine(n, 6 * m + 1)
        r = machine.dot(ap, [1] * n, [1] * n, m)
        want = int(math.log2(n))
        rows.append({"suite": "kernels", "case": f"dot n={n}", "measured": r.reduction_rounds,
                     "model": want, "ok": r.reduction_rounds == want and r.outputs == [n],
                     "text": f"dot n={n} -> rounds={r.reduction_rounds}"})
    for name, fn in (("vector_add", machine.vector_add), ("vector_mul", machine.vector_mul)):
        c = [fn(machine.ApMachine(n, 4 * m), [1] * n, [2] * n, m).cycles for n in (16, 1024)]
        rows.append({"suite": "kernels", "case": f"{name} n=16 vs 1024", "measured": c[1],
                     "model": c[0], "ok": c[0] == c[1], "text": f"{name}: cycles {c[0]} vs {c[1]}"})
    for n in (16, 4096):
        ap = machine.ApMachine(n, 14)
        machine.membership(ap, list(range(n)), 3, 13)
        rows.append({"suite": "kernels", "case": f"membership n={n}", "measured": ap.stats.compare_cycles,
                     "model": 1, "ok": ap.stats.compare_cycles == 1,
                     "text": f"membership n={n}: compare_cycles={ap.stats.compare_cycles}"})
    for n in (16, 1024):
        r = machine.histogram(machine.ApMachine(n, m + 1), [i % 4 for i in range(n)], [0, 1, 2, 3], m)
        rows.append({"suite": "kernels", "case": f"histogram k=4 n={n}", "measured": r.cycles,
                     "model": 8, "ok": r.cycles == 8, "text": f"histogram k=4 n={n}: cycles={r.cycles}"})
    return rows


def _bench_lifetime() -> list[dict]:
    rows = []
    ref = cost.lifetime(96 / 640, 1e9, 1e10)
    rows.append({"suite": "lifetime", "case": "redox-like 1e10 @1 GHz", "measured": round(ref, 3),
                 "model": 66.0, "ok": abs(ref - 66.7) / 66.7 <= 0.02,
                 "text": f"redox-like 10^10 @1 GHz: {ref:.1f} s"})
    g = SplitMix64(1)
    n = 1024
    _, st, _ = isa.apply(isa.OpKind.ADD_IP, 64, g.operands(n, 64), g.operands(n, 64))
    for tech in cost.presets():
        rep = cost.cost_report(st, tech, 1e9)
        years = rep.lifetime_s / cost.SECONDS_PER_YEAR
        rows.append({"suite": "lifetime", "case": f"{tech.name} ADD_IP m=64", "measured": rep.lifetime_s,
                     "model": None, "ok": True,
                     "text": f"{tech.name} ADD_IP m=64: rate {rep.write_rate:.3f}/cycle, "
                             f"lifetime {rep.lifetime_s:.3g} s ({years:.3g} y)"})
    return rows


SUITES = {"primitives": _bench_primitives, "kernels": _bench_kernels, "lifetime": _bench_lifetime}


def cmd_bench(args) -> int:
    rows = SUITES[args.suite]()
    width = max(len(r["text"]) for r in rows)
    for r in rows:
        print(f"{r['text']:<{width}}  {'ok' if r['ok'] else 'FAIL'}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["suite", "case", "measured", "model", "ok"],
                               extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return EXIT_OK if all(r["ok"] for r in rows) else EXIT_VERIFY


def cmd_presets(args) -> int:
    table = cost.load_overrides(args.override) if args.override else cost.presets()
    cols = ("name", "endurance_cycles", "write_energy_fJ", "write_latency_ns", "cell_area_um2",
            "compare_energy_fJ", "cycle_time_ns")
    cells = [cols] + [tuple(f"{getattr(p, c):g}" if c != "name" else p.name for c in cols) for p in table]
    widths = [max(len(r[i]) for r in cells) for i in range(len(cols))]
    for r in cells:
        print("  ".join(v.rjust(w) if i else v.ljust(w) for i, (v, w) in enumerate(zip(r, widths))))
    print("compare energy defaults to write energy / 10 (modeling assumption)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="apsim", description="Associative processor simulator")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile-lut", help="compile a truth table into a pass schedule")
    c.add_argument("--in", dest="inp", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--minimize", action="store_true")
    c.set_defaults(func=cmd_compile_lut)

    v = sub.add_parser("verify-lut", help="check a schedule against its truth table")
    v.add_argument("--schedule", required=True)
    v.add_argument("--table", required=True)
    v.set_defaults(func=cmd_verify_lut)

    r = sub.add_parser("run", help="run one op or kernel on seeded random operands")
    what = r.add_mutually_exclusive_group(required=True)
    what.add_argument("--op")
    what.add_argument("--kernel")
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--bits", type=int, required=True)
    r.add_argument("--tech", required=True)
    r.add_argument("--clock", type=float, default=1e9)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--minimize", action="store_true")
    r.add_argument("--k", type=int, help="histogram bin count")
    r.add_argument("--taps", type=int, help="filter1d tap count")
    r.add_argument("--out", default="-")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="regression sweeps")
    b.add_argument("--suite", choices=sorted(SUITES), required=True)
    b.add_argument("--csv")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("presets", help="list technology presets")
    s.add_argument("--override")
    s.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContractError, lut.TableError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
