"""Synchronous mediated execution.

A stage has three phases: every live machine runs until it blocks on
``RECV`` or halts (its sends are collected), the mediator answers, and the
answers become readable in the next stage.  A machine that gets nothing in a
stage reads the empty message.  Deliveries to one recipient are ordered by
sender index.

Repeated games use the same interface with a scripted mediator that plays
nature: each round it runs every player's per-round automaton on
``signal;state`` and relays last-round moves as the next signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import (
    BudgetExceeded,
    InvalidSpec,
    SchemaError,
    StageLimitExceeded,
    TapeExhausted,
)
from .vm import (
    Execution,
    MachineProgram,
    Message,
    MessageRecord,
    RunBudget,
    RunMeter,
    View,
    program,
    run_machine,
)

MEDIATOR = "mediator"


# ---------------------------------------------------------------------------
# functionalities

def _bits_op(xs, op):
    n = len(xs[0])
    out = []
    for pos in range(n):
        acc = int(xs[0][pos])
        for x in xs[1:]:
            acc = op(acc, int(x[pos]))
        out.append(str(acc))
    return "".join(out)


def _f_xor(xs, r):
    y = _bits_op(xs, lambda a, b: a ^ b)
    return (y,) * len(xs)


def _f_and(xs, r):
    y = _bits_op(xs, lambda a, b: a & b)
    return (y,) * len(xs)


def _f_identity(xs, r):
    return tuple(xs)


def _f_zero(xs, r):
    return tuple("0" * len(x) for x in xs)


def _f_coin(xs, r):
    return (r,) * len(xs)


def _f_leak_first(xs, r):
    return ("0" * len(xs[0]),) + (xs[0],) * (len(xs) - 1)


NAMED_FUNCTIONALITIES = {
    "xor": (_f_xor, 0),
    "and": (_f_and, 0),
    "identity": (_f_identity, 0),
    "zero": (_f_zero, 0),
    "coin": (_f_coin, 1),
    "leak_first": (_f_leak_first, 0),
}


@dataclass(frozen=True)
class Functionality:
    """An m-ary functionality: a named built-in or an explicit table.

    Table keys are ``"x1,x2"`` (or ``"x1,x2|r"`` when ``rand_bits > 0``) and
    values ``"y1,y2"``.
    """

    name: str = "table"
    table: tuple = ()
    rand_bits: int = 0

    def __post_init__(self):
        if isinstance(self.table, dict):
            object.__setattr__(self, "table", tuple(sorted(self.table.items())))
        if self.name != "table":
            if self.name not in NAMED_FUNCTIONALITIES:
                raise SchemaError(f"unknown functionality {self.name!r}")
            object.__setattr__(self, "rand_bits", NAMED_FUNCTIONALITIES[self.name][1])

    def __call__(self, inputs: tuple, rand: str = "") -> tuple:
        if self.name != "table":
            return NAMED_FUNCTIONALITIES[self.name][0](tuple(inputs), rand)
        key = ",".join(inputs) + (("|" + rand) if self.rand_bits else "")
        for k, v in self.table:
            if k == key:
                return tuple(v.split(","))
        raise InvalidSpec(f"functionality table has no entry for {key!r}")

    def check_total(self, m: int, n: int) -> None:
        import itertools

        words = ["".join(b) for b in itertools.product("01", repeat=n)]
        rands = ["".join(b) for b in itertools.product("01", repeat=self.rand_bits)]
        for xs in itertools.product(words, repeat=m):
            for r in rands:
                ys = self(xs, r)
                if len(ys) != m:
                    raise InvalidSpec(f"functionality returns {len(ys)} outputs for {m} players")


# ---------------------------------------------------------------------------
# mediator specs and sessions

class _Tape:
    def __init__(self, bits: str):
        self.bits = bits
        self.pos = 0

    def read(self, k: int) -> str:
        if self.pos + k > len(self.bits):
            exc = TapeExhausted("mediator read past its tape")
            exc.participant = MEDIATOR
            raise exc
        out = self.bits[self.pos:self.pos + k]
        self.pos += k
        return out

    @property
    def consumed(self) -> str:
        return self.bits[: self.pos]


@dataclass(frozen=True)
class MediatorSpec:
    """``kind`` is ``comm``, ``functionality`` or ``scripted``.

    ``identity`` is the tag stamped on every message the mediator signs
    (0 for comm, which does not sign).  Scripted mediators are looked up by
    ``script`` name in :data:`SCRIPTS`; their parameters live in
    ``params``.
    """

    kind: str
    identity: int = 0
    functionality: Optional[Functionality] = None
    input_length: int = 0
    script: str = ""
    params: tuple = ()
    stage_limit: int = 64

    def __post_init__(self):
        if self.kind not in ("comm", "functionality", "scripted"):
            raise SchemaError(f"unknown mediator kind {self.kind!r}")
        if self.stage_limit < 1:
            raise SchemaError("stage_limit must be at least 1")
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))
        if self.kind == "functionality":
            if self.functionality is None or self.identity < 1:
                raise SchemaError("a functionality mediator needs f and an identity tag >= 1")
        if self.kind == "scripted" and self.script not in SCRIPTS:
            raise SchemaError(f"unknown mediator script {self.script!r}")

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    @property
    def rand_cap(self) -> int:
        if self.kind == "functionality":
            return self.functionality.rand_bits
        return int(self.param("rand_bits", 0))

    @property
    def is_driver(self) -> bool:
        return self.kind == "scripted" and hasattr(SCRIPTS[self.script], "drive")

    def session(self, players: int, nature: str, tape: _Tape):
        if self.kind == "comm":
            return _CommSession(players)
        if self.kind == "functionality":
            return _FunctionalitySession(self, players, tape)
        return SCRIPTS[self.script](self, players, nature, tape)

    def as_dict(self) -> dict:
        doc = {"kind": self.kind, "stage_limit": self.stage_limit}
        if self.kind == "functionality":
            f = self.functionality
            doc.update(identity=self.identity, input_length=self.input_length)
            doc["functionality"] = f.name if f.name != "table" else {
                "table": dict(f.table), "rand_bits": f.rand_bits}
        elif self.kind == "scripted":
            doc.update(identity=self.identity, script=self.script)
            doc.update({k: v for k, v in self.params})
        return doc


class _CommSession:
    def __init__(self, players):
        self.players = players
        self.flags = []

    def respond(self, stage, inbound):
        out = {}
        for sender in sorted(inbound):
            for content in inbound[sender]:
                body, sep, to = content.rpartition(";")
                if not sep or not to.isdigit():
                    continue
                j = int(to)
                if 1 <= j <= self.players:
                    out.setdefault(j, []).append(Message(body, 0, sender))
        return out


def _well_formed(x, n):
    return x is not None and len(x) == n and set(x) <= {"0", "1"}


class _FunctionalitySession:
    def __init__(self, spec, players, tape):
        self.spec = spec
        self.players = players
        self.tape = tape
        self.flags = []

    def respond(self, stage, inbound):
        if stage != 1:
            late = [i for i, msgs in inbound.items() if msgs]
            if late:
                self.flags.append(f"stage {stage}: ignored messages from players {late}")
            return {}
        n = self.spec.input_length
        xs = []
        for i in range(1, self.players + 1):
            msgs = inbound.get(i, [])
            x = msgs[0] if msgs else None
            xs.append(x if _well_formed(x, n) else "0" * n)
        f = self.spec.functionality
        rand = self.tape.read(f.rand_bits)
        ys = f(tuple(xs), rand)
        return {i: [Message(ys[i - 1], self.spec.identity, 0)] for i in range(1, self.players + 1)}


class _ComparatorSession:
    """Replies ``"1"`` to everyone if all first-stage messages are present
    and identical, otherwise ``"0"``."""

    def __init__(self, spec, players, nature, tape):
        self.spec = spec
        self.players = players
        self.flags = []

    def respond(self, stage, inbound):
        if stage != 1:
            return {}
        firsts = [inbound.get(i, [None])[0] if inbound.get(i) else None
                  for i in range(1, self.players + 1)]
        same = all(f is not None for f in firsts) and len(set(firsts)) == 1
        reply = "1" if same else "0"
        return {i: [Message(reply, self.spec.identity, 0)] for i in range(1, self.players + 1)}


class _RepeatedGame:
    """Nature as mediator for a finitely repeated game (driver script)."""

    def __init__(self, spec, players, nature, tape):  # pragma: no cover - drivers do not open sessions
        raise TypeError("repeated_game is a driver script")

    @staticmethod
    def drive(spec, units, types, tapes, budget, players):
        rounds = int(spec.param("rounds"))
        if rounds > spec.stage_limit:
            raise StageLimitExceeded(f"{rounds} rounds exceed the stage limit {spec.stage_limit}")
        signal = {i: "" for i in range(1, players + 1)}
        state = {i: "" for i in range(1, players + 1)}
        moves = {i: [] for i in range(1, players + 1)}
        state_bits = {i: 0 for i in range(1, players + 1)}
        acc = {}
        stages = []
        for r in range(1, rounds + 1):
            played = {}
            for key, prog, ports in units:
                inputs = tuple(signal[i] + ";" + state[i] for i in ports)
                tape, pos = tapes.get(key, ""), acc.get(key, {}).get("pos", 0)
                try:
                    res = run_machine(prog, inputs, tape[pos:], None, budget)
                except BudgetExceeded as exc:
                    exc.participant = key
                    raise
                a = acc.setdefault(key, {"pos": 0, "steps": 0, "rand": 0, "regs": 0,
                                         "prefix": [[] for _ in ports], "hist": []})
                a["pos"] += res.meter.rand_bits
                a["steps"] += res.meter.steps
                a["rand"] += res.meter.rand_bits
                a["regs"] = max(a["regs"], res.meter.registers_touched)
                for j, i in enumerate(ports):
                    a["prefix"][j].append(res.view.type_prefix[j])
                    a["hist"].append(MessageRecord(r, "in", signal[i], j))
                    out = res.outputs[j]
                    move, _, new_state = out.partition(";")
                    played[i] = move if move in ("0", "1") else "0"
                    state[i] = new_state
                    state_bits[i] = max(state_bits[i], len(new_state))
            for i in played:
                moves[i].append(played[i])
            stages.append(StageRecord(r, tuple(sorted(played.items())),
                                      tuple((i, _signal_for(i, played, players)) for i in sorted(played)),
                                      ()))
            signal = {i: _signal_for(i, played, players) for i in played}
        runs = []
        for key, prog, ports in units:
            a = acc.get(key)
            if a is None:
                a = {"pos": 0, "steps": 0, "rand": 0, "regs": 0, "prefix": [[] for _ in ports], "hist": []}
            meter = RunMeter(
                steps=a["steps"], program_size=prog.size, rand_bits=a["rand"],
                registers_touched=a["regs"], halted=True,
                state_bits=max(state_bits[i] for i in ports))
            view = View(
                type_prefix=tuple("|".join(p) for p in a["prefix"]),
                message_history=tuple(a["hist"]),
                random_prefix=tapes.get(key, "")[: a["pos"]],
                type_exhausted=tuple(False for _ in ports))
            runs.append(UnitRun(key, prog, ports, view, meter))
        outputs = tuple("".join(moves[i]) for i in range(1, players + 1))
        return Transcript(tuple(stages), outputs, tuple(runs), "", ())


def _signal_for(i, played, players):
    return "".join(played[j] for j in range(1, players + 1) if j != i)


SCRIPTS = {
    "comparator": _ComparatorSession,
    "repeated_game": _RepeatedGame,
}


def comm_mediator(stage_limit: int = 64) -> MediatorSpec:
    """The mediator that forwards ``m;j`` to player ``j`` and drops
    anything else."""
    return MediatorSpec("comm", 0, stage_limit=stage_limit)


def functionality_mediator(f, n: int, identity: int = 1, stage_limit: int = 8) -> MediatorSpec:
    """A mediator that collects one input per player in the first stage,
    substitutes ``0^n`` for missing or malformed inputs, and returns each
    player's component of ``f``.  ``f`` is a :class:`Functionality`, the
    name of a built-in, or a table dict."""
    if isinstance(f, str):
        f = Functionality(f)
    elif isinstance(f, dict):
        f = Functionality("table", f, int(f.pop("rand_bits", 0)) if "rand_bits" in f else 0)
    return MediatorSpec("functionality", identity, f, n, stage_limit=stage_limit)


def comparator_mediator(identity: int = 1) -> MediatorSpec:
    return MediatorSpec("scripted", identity, script="comparator", stage_limit=8)


# ---------------------------------------------------------------------------
# transcripts

@dataclass(frozen=True)
class StageRecord:
    stage: int
    to_mediator: tuple
    from_mediator: tuple
    actions: tuple = ()


@dataclass(frozen=True)
class UnitRun:
    key: object
    program: MachineProgram
    ports: tuple
    view: View
    meter: RunMeter


@dataclass(frozen=True)
class Transcript:
    stages: tuple
    outputs: tuple
    runs: tuple
    mediator_random_prefix: str = ""
    flags: tuple = field(default=())

    def view(self, player: int) -> View:
        for run in self.runs:
            if player in run.ports:
                return run.view
        raise KeyError(player)

    def as_dict(self) -> dict:
        return {
            "outputs": list(self.outputs),
            "mediator_random_prefix": self.mediator_random_prefix,
            "stages": [
                {"stage": s.stage,
                 "to_mediator": [[i, c] for i, c in s.to_mediator],
                 "from_mediator": [[i, m.content if isinstance(m, Message) else m,
                                    m.tag if isinstance(m, Message) else 0]
                                   for i, m in s.from_mediator]}
                for s in self.stages
            ],
            "flags": list(self.flags),
        }


def execute_units(units: list, mediator: MediatorSpec, types: tuple, tapes: dict,
                  budget: RunBudget, players: int) -> Transcript:
    """Run ``units`` (from :meth:`StrategyProfile.units`) against ``mediator``."""
    if mediator.is_driver:
        return SCRIPTS[mediator.script].drive(mediator, units, types, tapes, budget, players)
    nature = types[players] if len(types) > players else ""
    mtape = _Tape(tapes.get(MEDIATOR, ""))
    session = mediator.session(players, nature, mtape)
    execs = []
    for key, prog, ports in units:
        execs.append((key, ports, Execution(prog, tuple(types[i - 1] for i in ports),
                                            tapes.get(key, ""), budget, interactive=True)))
    stages = []
    deliveries = None
    stage = 0
    while True:
        stage += 1
        if stage > mediator.stage_limit:
            raise StageLimitExceeded(f"no halt within {mediator.stage_limit} stages")
        inbound = {}
        for key, ports, exe in execs:
            if exe.done:
                continue
            local = None
            if deliveries is not None:
                local = {j: deliveries.get(i, []) for j, i in enumerate(ports)}
            try:
                sent = exe.advance(local)
            except BudgetExceeded as exc:
                exc.participant = key
                raise
            for port, content in sent:
                inbound.setdefault(ports[port], []).append(content)
        to_med = tuple((i, c) for i in sorted(inbound) for c in inbound[i])
        if all(exe.done for _, _, exe in execs):
            stages.append(StageRecord(stage, to_med, ()))
            break
        deliveries = session.respond(stage, inbound)
        from_med = tuple((i, msg) for i in sorted(deliveries) for msg in deliveries[i])
        stages.append(StageRecord(stage, to_med, from_med))
    outputs = [""] * players
    runs = []
    for key, ports, exe in execs:
        res = exe.result()
        for j, i in enumerate(ports):
            outputs[i - 1] = res.outputs[j]
        runs.append(UnitRun(key, exe.program, ports, res.view, res.meter))
    return Transcript(tuple(stages), tuple(outputs), tuple(runs), mtape.consumed,
                      tuple(getattr(session, "flags", ())))


def execute_mediated(game, profile, mediator: MediatorSpec, types: tuple, tapes: dict,
                     budget: Optional[RunBudget] = None) -> Transcript:
    """Deterministic transcript of ``profile`` playing ``game`` with
    ``mediator`` on the given type profile and tapes (keyed by unit key and
    ``"mediator"``)."""
    budget = budget or game.budget
    return execute_units(profile.units(), mediator, tuple(types), dict(tapes), budget, game.players)


# ---------------------------------------------------------------------------
# canonical protocol machine

def lambda_machine(identity: int, flip_first: bool = False, label: Optional[str] = None) -> MachineProgram:
    """The machine that sends the ``x`` part of its type ``x;z`` to the
    mediator tagged ``identity`` and outputs the first reply carrying that
    tag.  Replies with any other tag are skipped; if none arrives it halts
    with empty output.  ``flip_first`` builds the corrupted variant that
    inverts the first output bit."""
    if label is None:
        label = f"lambda[{identity}]" + ("~flip" if flip_first else "")
    copy_first = []
    if flip_first:
        copy_first = [
            "READ_MSG r0",
            "LOAD r1 0",
            "LT r2 r0 r1",
            "JNZ r2 done",
            "LOAD r1 1",
            "SUB r0 r1 r0",
            "EMITR r0",
        ]
    return program(
        label, 3,
        "read:",
        "READ_TYPE r0",
        "LOAD r1 10",
        "EQ r2 r0 r1",
        "JNZ r2 send",
        "LOAD r1 0",
        "LT r2 r0 r1",
        "JNZ r2 send",
        "PUSH r0",
        "JMP read",
        "send:",
        "SEND",
        "wait:",
        "RECV",
        "MSG_TAG r0",
        f"LOAD r1 {identity}",
        "EQ r2 r0 r1",
        "JNZ r2 found",
        "POLL r0",
        "JZ r0 done",
        "JMP wait",
        "found:",
        *copy_first,
        "copy:",
        "READ_MSG r0",
        "LOAD r1 0",
        "LT r2 r0 r1",
        "JNZ r2 done",
        "EMITR r0",
        "JMP copy",
        "done:",
        "HALT",
    )


# ---------------------------------------------------------------------------
# repeated games

PD_PAYOFFS = ((3, -5), (5, -3))


def repeated_game_mediator(rounds: int, signal: str = "opponent_last") -> MediatorSpec:
    if rounds < 1:
        raise SchemaError("a repeated game needs at least one round")
    if signal != "opponent_last":
        raise SchemaError(f"unsupported signal rule {signal!r}")
    return MediatorSpec("scripted", 0, script="repeated_game",
                        params={"rounds": rounds, "signal": signal},
                        stage_limit=max(64, rounds))


def repeated_game_harness(stage_payoffs=PD_PAYOFFS, rounds: int = 10, delta=Fraction(9, 10),
                          signal: str = "opponent_last", alpha=Fraction(0), complexity=None,
                          machines=(), name: str = "repeated"):
    """A two-player finitely repeated game played through a nature mediator.

    ``stage_payoffs[x][y]`` is the row player's payoff when it plays ``x``
    against ``y`` (0 = cooperate, 1 = defect); the game is symmetric.  Each
    player's utility is its discounted total minus ``alpha`` whenever its
    complexity is at least 2.  The default complexity charges carried state
    (``state_charge``), so stateless automata cost 1.
    """
    from .complexity import ComplexityFnSpec
    from .game import GameSpec

    delta = Fraction(delta)
    alpha = Fraction(alpha)
    if not 0 < delta < 1:
        raise SchemaError("the discount factor must lie strictly between 0 and 1")
    med = repeated_game_mediator(rounds, signal)
    if complexity is None:
        complexity = ComplexityFnSpec.make("state_charge", weight=2)
    if isinstance(complexity, ComplexityFnSpec):
        complexity = {"default": complexity}
    matrix = [[Fraction(v) for v in row] for row in stage_payoffs]
    utils = (
        "discounted(a1, a2, payoffs, delta) - (alpha if c1 >= 2 else 0)",
        "discounted(a2, a1, payoffs, delta) - (alpha if c2 >= 2 else 0)",
    )
    return GameSpec.build(
        name=name, players=2, input_length=1,
        types=[(("", "", ""), Fraction(1))],
        machines=machines, complexity=complexity, utilities=utils,
        params={"payoffs": matrix, "delta": delta, "alpha": alpha, "rounds": rounds},
        mediator=med, monotone=True, utility_range=_discounted_range(matrix, rounds, delta, alpha),
    ), med


def _discounted_range(matrix, rounds, delta, alpha) -> tuple:
    """Bounds on a discounted total over ``rounds`` plays, weights at most
    ``sum(delta^k)``, with the complexity charge ``alpha`` on either side."""
    weight = sum(delta ** k for k in range(rounds + 1))
    lo = min(0, min(min(r) for r in matrix)) * weight
    hi = max(0, max(max(r) for r in matrix)) * weight
    return lo - max(alpha, 0), hi - min(alpha, 0)

