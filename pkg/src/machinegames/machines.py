"""Ready-made strategy programs used by the case studies and tests."""

from __future__ import annotations

import itertools

from .vm import MachineProgram, program


def constant(out: str, label: str = None) -> MachineProgram:
    """Emit ``out`` and halt (two steps)."""
    return program(label or f"const[{out}]", 0, f'EMIT "{out}"', "HALT")


# -- roshambo ---------------------------------------------------------------

ROCK, PAPER, SCISSORS = "0", "1", "2"


def roshambo_pure(move: str) -> MachineProgram:
    return constant(move, {"0": "R", "1": "P", "2": "S"}[move])


def uniform_roshambo() -> MachineProgram:
    """Rejection sampler: two coin flips per attempt, ``11`` retries."""
    return program(
        "U", 5,
        "loop:",
        "READ_RAND r0",
        "READ_RAND r1",
        "ADD r2 r0 r0",
        "ADD r2 r2 r1",
        "LOAD r3 3",
        "EQ r4 r2 r3",
        "JNZ r4 loop",
        "ADDI r2 r2 2",
        "MOD r2 r2 r3",
        "EMITR r2",
        "HALT",
    )


def roshambo_class():
    return (roshambo_pure("0"), roshambo_pure("1"), roshambo_pure("2"), uniform_roshambo())


# -- primality ----------------------------------------------------------------

_READ_BINARY = [
    "LOAD r1 0",
    "LOAD r5 0",
    "LOAD r6 2",
    "read:",
    "READ_TYPE r0",
    "LT r2 r0 r5",
    "JNZ r2 @{done}",
    "LT r2 r0 r6",
    "JZ r2 @{done}",
    "ADD r1 r1 r1",
    "ADD r1 r1 r0",
    "JMP read",
]


def trial_division() -> MachineProgram:
    """Deterministic tester: reads the type as a binary number ``v`` and
    tries every divisor ``2 <= d < v``; emits ``1`` for prime, ``0``
    otherwise."""
    return program(
        "tester", 7,
        *[line.format(done="test") for line in _READ_BINARY],
        "test:",
        "LOAD r3 2",
        "LT r4 r1 r3",
        "JNZ r4 composite",
        "loop:",
        "LT r4 r3 r1",
        "JZ r4 prime",
        "MOD r4 r1 r3",
        "JZ r4 composite",
        "ADDI r3 r3 1",
        "JMP loop",
        "prime:",
        'EMIT "1"',
        "HALT",
        "composite:",
        'EMIT "0"',
        "HALT",
    )


def fermat_tester(bases=(2, 7)) -> MachineProgram:
    """Randomized tester: one random bit picks a base ``a`` from ``bases``
    and the program checks ``a^v == a (mod v)`` by square-and-multiply over
    the bits of ``v``."""
    lo, hi = bases
    return program(
        "fermat", 10,
        *[line.format(done="ready") for line in _READ_BINARY[:3]],
        "LOAD r7 1",
        *[line.format(done="ready") for line in _READ_BINARY[3:-1]],
        "ADD r7 r7 r7",
        "JMP read",
        "ready:",
        "LOAD r6 2",
        "DIV r7 r7 r6",
        "READ_RAND r8",
        f"LOAD r9 {hi - lo}",
        "MUL r8 r8 r9",
        f"ADDI r8 r8 {lo}",
        "LOAD r3 1",
        "exp:",
        "JZ r7 fin",
        "MUL r3 r3 r3",
        "MOD r3 r3 r1",
        "DIV r4 r1 r7",
        "MOD r4 r4 r6",
        "JZ r4 skip",
        "MUL r3 r3 r8",
        "MOD r3 r3 r1",
        "skip:",
        "DIV r7 r7 r6",
        "JMP exp",
        "fin:",
        "MOD r4 r8 r1",
        "EQ r4 r3 r4",
        "EMITR r4",
        "HALT",
    )


# -- repeated prisoner's dilemma ---------------------------------------------
# Per-round automata read "signal;state" and write "move" or "move;state".
# Moves: 0 = cooperate, 1 = defect; the first round has an empty signal.

def tit_for_tat() -> MachineProgram:
    return program(
        "TfT", 3,
        "READ_TYPE r0",
        "LOAD r1 10",
        "EQ r2 r0 r1",
        "JNZ r2 first",
        "EMITR r0",
        "HALT",
        "first:",
        'EMIT "0"',
        "HALT",
    )


def mealy(start: tuple, table: dict, label: str = None) -> MachineProgram:
    """Compile a deterministic automaton.

    ``start = (move, next_state)`` is the first-round behaviour from state 0;
    ``table[(state, signal)] = (move, next_state)`` for ``signal`` in 0/1.
    With a single state the program carries nothing between rounds;
    otherwise it carries its state as one symbol.
    """
    states = sorted({s for s, _ in table} | {start[1]} | {n for _, n in table.values()})
    stateless = states == [0]
    if label is None:
        label = "mealy[" + _mealy_code(start, table, stateless) + "]"

    def out(move, nxt):
        lines = [f'EMIT "{move}"']
        if not stateless:
            lines.append(f'EMIT ";{nxt}"')
        lines.append("HALT")
        return lines

    lines = [
        "READ_TYPE r0",
        "LOAD r1 10",
        "EQ r2 r0 r1",
        "JNZ r2 first",
    ]
    if stateless:
        lines += ["JNZ r0 s0d"]
    else:
        lines += ["READ_TYPE r1", "READ_TYPE r1", "JNZ r1 s1", "JNZ r0 s0d", "JMP s0c", "s1:", "JNZ r0 s1d", "JMP s1c"]
    for s in states:
        for sig, tag in ((0, "c"), (1, "d")):
            lines.append(f"s{s}{tag}:")
            lines += out(*table[(s, sig)])
    lines.append("first:")
    lines += out(*start)
    return program(label, 3, *lines)


def _mealy_code(start, table, stateless):
    parts = [f"{start[0]}{start[1] if not stateless else ''}"]
    for key in sorted(table):
        move, nxt = table[key]
        parts.append(f"{move}{nxt if not stateless else ''}")
    return ".".join(parts)


def all_automata(max_states: int = 2) -> list:
    """Every deterministic automaton with at most ``max_states`` states
    (1 or 2); the 2-state family fixes state 0 as the start."""
    if max_states not in (1, 2):
        raise ValueError("only 1- and 2-state automata are enumerated")
    out = []
    for first, c, d in itertools.product("01", repeat=3):
        out.append(mealy((first, 0), {(0, 0): (c, 0), (0, 1): (d, 0)}))
    if max_states == 2:
        cells = [(s, sig) for s in (0, 1) for sig in (0, 1)]
        choices = list(itertools.product("01", (0, 1)))
        for start in choices:
            for combo in itertools.product(choices, repeat=4):
                out.append(mealy(start, dict(zip(cells, combo))))
    return out


def counting_deviant(rounds: int, k: int, mode: str = "once", label: str = None) -> MachineProgram:
    """A deviant that keeps a binary round counter as carried state.

    ``once``: defect in round ``k`` only, otherwise mirror the opponent;
    ``forever``: mirror before round ``k``, defect from ``k`` on;
    ``k_and_last``: defect in rounds ``k`` and ``rounds``, cooperate
    otherwise.  The counter uses ``rounds.bit_length()`` symbols.
    """
    width = rounds.bit_length()
    if label is None:
        label = f"count[{mode},{k}/{rounds}]"
    lines = [
        "READ_TYPE r0",
        "LOAD r7 10",
        "EQ r6 r0 r7",
        "JZ r6 have",
        "LOAD r0 0",
        "JMP state",
        "have:",
        "READ_TYPE r1",
        "state:",
        "LOAD r2 0",
        "rs:",
        "READ_TYPE r1",
        "LOAD r7 0",
        "LT r6 r1 r7",
        "JNZ r6 decide",
        "ADD r2 r2 r2",
        "ADD r2 r2 r1",
        "JMP rs",
        "decide:",
        "ADDI r2 r2 1",
        "MOV r3 r0",
    ]
    if mode == "once":
        lines += [f"LOAD r7 {k}", "EQ r6 r2 r7", "JZ r6 out", "LOAD r3 1"]
    elif mode == "forever":
        lines += [f"LOAD r7 {k}", "LT r6 r2 r7", "JNZ r6 out", "LOAD r3 1"]
    elif mode == "k_and_last":
        lines += ["LOAD r3 0", f"LOAD r7 {k}", "EQ r6 r2 r7", "JNZ r6 defect",
                  f"LOAD r7 {rounds}", "EQ r6 r2 r7", "JZ r6 out", "defect:", "LOAD r3 1"]
    else:
        raise ValueError(f"unknown deviant mode {mode!r}")
    lines += ["out:", "EMITR r3", 'EMIT ";"']
    for j in reversed(range(width)):
        lines += [f"LOAD r7 {2 ** j}", "DIV r6 r2 r7", "LOAD r7 2", "MOD r6 r6 r7", "EMITR r6"]
    lines.append("HALT")
    return program(label, 8, *lines)


def counting_deviants(rounds: int) -> list:
    return [counting_deviant(rounds, k, mode)
            for mode in ("once", "forever", "k_and_last") for k in range(1, rounds + 1)]


def cooperate_then_defect_last(rounds: int) -> MachineProgram:
    """Tit-for-tat that defects in the last round regardless."""
    return counting_deviant(rounds, rounds, "once", label="coop_then_defect_last")


# -- revelation ---------------------------------------------------------------

def prefix_sender(bits: int, label: str = None, invert: bool = False) -> MachineProgram:
    """Send the first ``bits`` symbols of the type, then output the first
    symbol of the reply (inverted if ``invert``)."""
    label = label or (f"prefix[{bits}]" + ("~inv" if invert else ""))
    post = ["LOAD r1 1", "SUB r0 r1 r0"] if invert else []
    return program(
        label, 3,
        f"LOAD r1 {bits}",
        "loop:",
        "JZ r1 send",
        "READ_TYPE r0",
        "PUSH r0",
        "ADDI r1 r1 -1",
        "JMP loop",
        "send:",
        "SEND",
        "RECV",
        "READ_MSG r0",
        "LOAD r1 0",
        "LT r2 r0 r1",
        "JNZ r2 done",
        *post,
        "EMITR r0",
        "done:",
        "HALT",
    )


def full_sender(label: str = "full") -> MachineProgram:
    """Send the whole type, then output the first symbol of the reply."""
    return program(
        label, 3,
        "loop:",
        "READ_TYPE r0",
        "LOAD r1 0",
        "LT r2 r0 r1",
        "JNZ r2 send",
        "PUSH r0",
        "JMP loop",
        "send:",
        "SEND",
        "RECV",
        "READ_MSG r0",
        "LOAD r1 0",
        "LT r2 r0 r1",
        "JNZ r2 done",
        "EMITR r0",
        "done:",
        "HALT",
    )
