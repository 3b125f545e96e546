"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES: dict[int, str] = {}


def record(n: int, ok: bool, title: str, detail: str, seconds: float) -> str:
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail}; {seconds:.2f} s)"
    LINES[n] = line
    print(line)
    return line
