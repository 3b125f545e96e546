"""Independent host references used by the tests. Plain Python integers only."""

import itertools

M_OPS = {
    "NOT", "AND", "OR", "XOR", "ADD_IP", "SUB_IP", "ADD_OOP", "SUB_OOP", "NEG_OOP", "ABS_OOP",
}


def signed(v, m):
    return v - (1 << m) if v >> (m - 1) & 1 else v


def op_ref(op, m, a, b=0, r=0):
    mask, mask2 = (1 << m) - 1, (1 << 2 * m) - 1
    return {
        "NOT": lambda: ~a & mask,
        "AND": lambda: a & b,
        "OR": lambda: a | b,
        "XOR": lambda: a ^ b,
        "ADD_IP": lambda: (a + b) & mask,
        "SUB_IP": lambda: (b - a) & mask,
        "ADD_OOP": lambda: (a + b) & mask,
        "SUB_OOP": lambda: (a - b) & mask,
        "NEG_OOP": lambda: -a & mask,
        "ABS_OOP": lambda: abs(signed(a, m)) & mask,
        "MUL_U": lambda: a * b,
        "MUL_S": lambda: signed(a, m) * signed(b, m) & mask2,
        "MAC_U": lambda: (r + a * b) & mask2,
        "MAC_S": lambda: (r + signed(a, m) * signed(b, m)) & mask2,
    }[op]()


def simulate_passes(passes, columns, outputs, assignment):
    """Fresh-tag replay of (cube, targets, write) passes on one row.

    ``cube`` uses None for don't-care. Returns (outputs, times matched).
    """
    state = dict(zip(columns, assignment))
    hits = 0
    for cube, targets, write in passes:
        if all(d is None or state[c] == d for c, d in zip(columns, cube)):
            hits += 1
            for t, d in zip(targets, write):
                state[t] = d
    return tuple(state.get(o, 0) for o in outputs), hits


def hazard_precedences(transitions):
    """Brute force: (v, u) whenever u's written state lies in v's cube, so v must run first.

    ``transitions`` are (cube_str, write_str, columns, targets) with MSB-left strings.
    """
    out = set()
    for u in transitions:
        for v in transitions:
            if u is v:
                continue
            cube_u, write_u, cols, targets = u
            cube_v = v[0]
            state = dict(zip(cols, cube_u))
            for t, d in zip(targets, write_u):
                state[t] = d
            if all(cv == "X" or state[c] == cv for c, cv in zip(cols, cube_v)):
                out.add((v[0], u[0]))
    return out


def all_pairs(m):
    return list(itertools.product(range(1 << m), repeat=2))
