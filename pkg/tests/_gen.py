"""Seeded generators for machine programs and small games.

Each generator takes a ``random.Random`` so the acceptance run can fix its
sample exactly, while the hypothesis suites map drawn integers to seeds.
"""

import random
from fractions import Fraction

from hypothesis import strategies as st

from machinegames import GameSpec, MachineProgram
from machinegames.complexity import ComplexityFnSpec
from machinegames.machines import constant
from machinegames.vm import Instruction, program

REGISTERS = 4

SHIPPED_SPECS = [
    ComplexityFnSpec("steps"),
    ComplexityFnSpec("size"),
    ComplexityFnSpec.make("rand_charge"),
    ComplexityFnSpec.make("rand_charge", deterministic=3, randomized=5),
    ComplexityFnSpec.make("state_charge", weight=2),
    ComplexityFnSpec.make("coarse_threshold", threshold=3),
    ComplexityFnSpec.make("weighted_sum", offset=1, weights={"steps": 1, "rand_bits": 2}),
    ComplexityFnSpec.make("worst_case_plus_size", input_length=2, max_steps=200, max_rand_bits=6),
    ComplexityFnSpec.make("constant_for_protocol", c0=1, labels=["gen0", "gen1"]),
    ComplexityFnSpec.make("steps", free_randomization=True),
]

# specs cheap enough to evaluate inside game-level properties
GAME_SPECS = [s for s in SHIPPED_SPECS if s.kind != "worst_case_plus_size"]


def random_instruction(rng: random.Random, pc: int, length: int) -> Instruction:
    r = lambda: rng.randrange(REGISTERS)  # noqa: E731
    kind = rng.choice(["read_type", "read_rand", "load", "arith", "arith", "jump", "emit", "emitr"])
    if kind == "read_type":
        return Instruction("READ_TYPE", (r(),))
    if kind == "read_rand":
        return Instruction("READ_RAND", (r(),))
    if kind == "load":
        return Instruction("LOAD", (r(), rng.randrange(-2, 4)))
    if kind == "arith":
        op = rng.choice(["ADD", "SUB", "MUL", "DIV", "MOD", "EQ", "LT"])
        if rng.random() < 0.2:
            return Instruction("ADDI", (r(), r(), rng.randrange(-2, 3)))
        return Instruction(op, (r(), r(), r()))
    if kind == "jump":
        # forward only, so every run halts
        target = rng.randrange(pc + 1, length + 1)
        op = rng.choice(["JZ", "JNZ", "JMP"])
        return Instruction(op, (target,) if op == "JMP" else (r(), target))
    if kind == "emit":
        return Instruction("EMIT", (rng.choice(["0", "1", "01", ""]),))
    return Instruction("EMITR", (r(),))


def random_program(rng: random.Random, label: str = None) -> MachineProgram:
    """A terminating program of 1 to 12 instructions.

    About a quarter of them open with a rejection loop over two random
    bits, so tape enumeration and truncation get exercised too."""
    length = rng.randint(1, 12)
    body = [random_instruction(rng, pc, length) for pc in range(length)]
    if rng.random() < 0.25:
        head = [Instruction("READ_RAND", (0,)), Instruction("READ_RAND", (1,)),
                Instruction("MUL", (2, 0, 1)), Instruction("JNZ", (2, 0))]
        body = head + [_shift(ins, len(head)) for ins in body]
    if rng.random() < 0.7:
        body.append(Instruction("HALT"))
    return MachineProgram(tuple(body), REGISTERS, label or f"gen{rng.randrange(10**6)}")


def _shift(ins: Instruction, k: int) -> Instruction:
    if ins.op == "JMP":
        return Instruction("JMP", (ins.args[0] + k,))
    if ins.op in ("JZ", "JNZ"):
        return Instruction(ins.op, (ins.args[0], ins.args[1] + k))
    return ins


def random_type(rng: random.Random) -> str:
    return "".join(rng.choice("01") for _ in range(rng.randint(0, 4)))


def random_tape(rng: random.Random) -> str:
    return "".join(rng.choice("01") for _ in range(rng.randint(0, 10)))


# --- small two-player games --------------------------------------------------

COIN = program("coin", 1, "READ_RAND r0", "EMITR r0", "HALT")
ECHO = program("echo", 1, "READ_TYPE r0", "EMITR r0", "HALT")
FLIP = program("flip", 2, "READ_TYPE r0", "LOAD r1 1", "SUB r0 r1 r0", "EMITR r0", "HALT")


def _matrix(rng):
    return [[Fraction(rng.randint(-4, 4), rng.choice([1, 2, 3])) for _ in range(4)] for _ in range(4)]


def random_game(rng: random.Random) -> GameSpec:
    """Two players, one-bit types with a random prior, a 4x4 payoff table
    indexed by action (``""``, ``"0"``, ``"1"``, other) and a complexity
    charge ``w_i * c_i``.  Utilities read only their own complexity and
    never increase with it, so the game is monotone."""
    weights = [rng.randint(0, 3) for _ in range(4)]
    total = sum(weights) or 1
    if not sum(weights):
        weights = [1, 0, 0, 0]
    probs = [Fraction(w, total) for w in weights]
    types = {(a, b): p for (a, b), p in zip([("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")], probs) if p}
    idx = "min(3, num({}) + 1)"
    utils = [f"m{i}[{idx.format('a1')}][{idx.format('a2')}] - w{i} * c{i}" for i in (1, 2)]
    machines = [constant("0", "zero"), constant("1", "one"), COIN, ECHO, FLIP]
    machines += [random_program(rng, f"gen{k}") for k in range(2)]
    spec = rng.choice(GAME_SPECS)
    return GameSpec.build(
        name=f"random{rng.randrange(10**6)}", players=2, input_length=1, types=types,
        utilities=utils, machines=machines, complexity={"default": spec},
        params={"m1": _matrix(rng), "m2": _matrix(rng), "w1": rng.randint(0, 2), "w2": rng.randint(0, 2)},
        monotone=True,
    )


seeds = st.integers(min_value=0, max_value=2**32 - 1)
programs = seeds.map(lambda s: random_program(random.Random(s)))
games = seeds.map(lambda s: random_game(random.Random(s)))
