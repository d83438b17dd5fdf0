"""Metered register machine used to express strategies.

A :class:`MachineProgram` is a finite list of instructions over a small
register machine.  Besides arithmetic and jumps the instruction set has
explicit ports to the outside world: the player's type (``READ_TYPE``), the
random tape (``READ_RAND``), messages to and from a mediator (``SEND`` /
``RECV``) and the action output (``EMIT``).  The interpreter records exactly
which part of each input was consumed (the :class:`View`) and a
:class:`RunMeter` that complexity functions are evaluated on.

Symbols read from types and messages are returned as small integers:
``'0'``-``'9'`` map to 0-9, ``';'`` to 10 and ``'|'`` to 11.  Reading past
the end of a string yields -1.

A program may control several ports at once (a coalition controller).  Each
entry point starts a thread bound to the port with the same index; threads
run round-robin, each until it halts or blocks on ``RECV``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .errors import (
    BudgetExceeded,
    DSLError,
    InvalidProgram,
    PortFault,
    TapeExhausted,
)

SEP = 10
BAR = 11
_SYMBOL_CODES = {str(d): d for d in range(10)}
_SYMBOL_CODES[";"] = SEP
_SYMBOL_CODES["|"] = BAR


def symbol_code(ch: str) -> int:
    try:
        return _SYMBOL_CODES[ch]
    except KeyError:
        raise ValueError(f"unsupported symbol {ch!r}") from None


def code_symbol(value: int) -> str:
    if 0 <= value <= 9:
        return str(value)
    if value == SEP:
        return ";"
    if value == BAR:
        return "|"
    return str(value)


# opcode -> operand kinds: r = register, i = integer, t = jump target, s = string
OPCODES = {
    "READ_TYPE": "r",
    "READ_RAND": "r",
    "READ_MSG": "r",
    "MSG_TAG": "r",
    "MSG_FROM": "r",
    "POLL": "r",
    "LOAD": "ri",
    "MOV": "rr",
    "ADD": "rrr",
    "SUB": "rrr",
    "MUL": "rrr",
    "DIV": "rrr",
    "MOD": "rrr",
    "ADDI": "rri",
    "EQ": "rrr",
    "LT": "rrr",
    "JMP": "t",
    "JZ": "rt",
    "JNZ": "rt",
    "PUSH": "r",
    "PUSHS": "s",
    "SEND": "",
    "SENDS": "s",
    "RECV": "",
    "EMIT": "s",
    "EMITR": "r",
    "PORT": "i",
    "SELECT": "i",
    "HALT": "",
}

_WRITES_FIRST = {
    "READ_TYPE", "READ_RAND", "READ_MSG", "MSG_TAG", "MSG_FROM", "POLL",
    "LOAD", "MOV", "ADD", "SUB", "MUL", "DIV", "MOD", "ADDI", "EQ", "LT",
}


@dataclass(frozen=True)
class Instruction:
    op: str
    args: tuple = ()

    def __str__(self):
        kinds = OPCODES[self.op]
        parts = [self.op]
        for kind, arg in zip(kinds, self.args):
            if kind == "r":
                parts.append(f"r{arg}")
            elif kind == "s":
                parts.append('"' + arg + '"')
            elif kind == "t":
                parts.append(f"@{arg}")
            else:
                parts.append(str(arg))
        return " ".join(parts)


@dataclass(frozen=True)
class MachineProgram:
    """An immutable strategy program.

    ``entry_points`` lists the starting instruction of each thread; a normal
    single-player program has one thread starting at 0.  Jumping to
    ``len(instructions)`` (or running off the end) halts the thread.
    """

    instructions: tuple = ()
    register_count: int = 0
    label: str = ""
    entry_points: tuple = (0,)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        object.__setattr__(self, "entry_points", tuple(self.entry_points))
        validate_program(self)

    @property
    def size(self) -> int:
        return len(self.instructions)

    @property
    def is_bot(self) -> bool:
        return self == BOT

    @property
    def uses_ports(self) -> bool:
        return any(ins.op in ("SEND", "SENDS", "RECV") for ins in self.instructions)

    @property
    def thread_count(self) -> int:
        return len(self.entry_points)

    def relabel(self, label: str) -> "MachineProgram":
        return replace(self, label=label)

    def __repr__(self):
        return f"MachineProgram(label={self.label!r}, size={self.size})"


def validate_program(program: MachineProgram) -> None:
    n = len(program.instructions)
    if program.register_count < 0:
        raise InvalidProgram("register_count must be nonnegative")
    if not program.entry_points:
        raise InvalidProgram("a program needs at least one entry point")
    for e in program.entry_points:
        if not 0 <= e <= n:
            raise InvalidProgram(f"entry point {e} out of range")
    for pc, ins in enumerate(program.instructions):
        kinds = OPCODES.get(ins.op)
        if kinds is None:
            raise InvalidProgram(f"unknown opcode {ins.op!r} at {pc}")
        if len(ins.args) != len(kinds):
            raise InvalidProgram(f"{ins.op} at {pc} takes {len(kinds)} operands")
        for kind, arg in zip(kinds, ins.args):
            if kind == "r":
                if not isinstance(arg, int) or not 0 <= arg < program.register_count:
                    raise InvalidProgram(f"{ins.op} at {pc}: undeclared register {arg!r}")
            elif kind == "t":
                if not isinstance(arg, int) or not 0 <= arg <= n:
                    raise InvalidProgram(f"{ins.op} at {pc}: jump target {arg!r} out of range")
            elif kind == "i":
                if not isinstance(arg, int):
                    raise InvalidProgram(f"{ins.op} at {pc}: integer operand expected")
            elif kind == "s":
                if not isinstance(arg, str):
                    raise InvalidProgram(f"{ins.op} at {pc}: string operand expected")


BOT = MachineProgram(instructions=(), register_count=0, label="bot")


def canonical_bot() -> MachineProgram:
    """The machine that reads nothing, changes no state and writes nothing."""
    return BOT


@dataclass(frozen=True)
class RunBudget:
    max_steps: int = 10_000
    max_output_bits: int = 256
    max_rand_bits: int = 16

    def __post_init__(self):
        if min(self.max_steps, self.max_output_bits, self.max_rand_bits) <= 0:
            raise ValueError("all budget bounds must be positive")


@dataclass(frozen=True)
class Message:
    """A delivered message.  ``tag`` is the identity of the mediator that
    signed it (0 = unsigned) and ``sender`` the originating player (0 = the
    mediator itself)."""

    content: str = ""
    tag: int = 0
    sender: int = 0


LAMBDA = Message()


@dataclass(frozen=True)
class MessageRecord:
    stage: int
    direction: str  # "in" or "out"
    content: str
    port: int = 0
    tag: int = 0
    sender: int = 0


@dataclass(frozen=True)
class View:
    """What a run actually consumed: per-port type prefixes, message history
    and the random bits read.  ``type_exhausted`` marks ports whose type was
    read up to the end marker."""

    type_prefix: tuple = ("",)
    message_history: tuple = ()
    random_prefix: str = ""
    type_exhausted: tuple = (False,)


@dataclass(frozen=True)
class RunMeter:
    steps: int = 0
    program_size: int = 0
    rand_bits: int = 0
    registers_touched: int = 0
    halted: bool = True
    budget_exceeded: bool = False
    sent_bits: int = 0
    state_bits: int = 0
    select_steps: Optional[int] = None
    select_rand_bits: Optional[int] = None
    selected_size: Optional[int] = None


@dataclass(frozen=True)
class RunResult:
    outputs: tuple
    view: View
    meter: RunMeter

    @property
    def output(self) -> str:
        return self.outputs[0]

    def __iter__(self):
        return iter((self.output, self.view, self.meter))


class _Thread:
    __slots__ = ("pc", "port", "halted", "blocked", "msg", "msg_pos", "outbuf")

    def __init__(self, pc, port):
        self.pc = pc
        self.port = port
        self.halted = False
        self.blocked = False
        self.msg = None
        self.msg_pos = 0
        self.outbuf = []


class Execution:
    """Resumable run of one program over one or more ports.

    ``advance`` runs every live thread until it halts or blocks on an empty
    inbox and returns the messages sent during that phase as
    ``(port, content)`` pairs.
    """

    def __init__(self, program: MachineProgram, types: Sequence[str], tape: str,
                 budget: RunBudget, interactive: bool = False):
        self.program = program
        self.types = tuple(types)
        self.tape = tape
        self.budget = budget
        self.interactive = interactive
        nports = len(self.types)
        if program.thread_count > nports and not program.is_bot:
            raise InvalidProgram(
                f"{program.label!r} has {program.thread_count} threads but only {nports} ports")
        self.threads = [_Thread(e, j) for j, e in enumerate(program.entry_points)]
        self.regs = [0] * program.register_count
        self.touched = set()
        self.type_pos = [0] * nports
        self.type_end = [False] * nports
        self.tape_pos = 0
        self.outputs = [[] for _ in range(nports)]
        self.out_len = [0] * nports
        self.inbox = [deque() for _ in range(nports)]
        self.stage = 0
        self.steps = 0
        self.sent_bits = 0
        self.history = []
        self.select = None

    @property
    def done(self) -> bool:
        return all(t.halted for t in self.threads)

    def meter(self, halted=None, exceeded=False) -> RunMeter:
        sel = self.select or (None, None, None)
        return RunMeter(
            steps=self.steps,
            program_size=self.program.size,
            rand_bits=self.tape_pos,
            registers_touched=len(self.touched),
            halted=self.done if halted is None else halted,
            budget_exceeded=exceeded,
            sent_bits=self.sent_bits,
            select_steps=sel[0],
            select_rand_bits=sel[1],
            selected_size=sel[2],
        )

    def view(self) -> View:
        return View(
            type_prefix=tuple(t[:p] for t, p in zip(self.types, self.type_pos)),
            message_history=tuple(self.history),
            random_prefix=self.tape[: self.tape_pos],
            type_exhausted=tuple(self.type_end),
        )

    def result(self) -> RunResult:
        return RunResult(tuple("".join(o) for o in self.outputs), self.view(), self.meter())

    def _exceeded(self, why, exc=BudgetExceeded):
        raise exc(why, meter=self.meter(halted=False, exceeded=True))

    def advance(self, deliveries=None):
        self.stage += 1
        if deliveries is not None:
            for port in range(len(self.inbox)):
                msgs = deliveries.get(port, ())
                self.inbox[port] = deque(msgs if msgs else (LAMBDA,))
        sent = []
        for th in self.threads:
            if th.halted:
                continue
            th.blocked = False
            self._run_thread(th, sent)
        return sent

    def _run_thread(self, th: _Thread, sent: list) -> None:
        ins_list = self.program.instructions
        n = len(ins_list)
        regs = self.regs
        touched = self.touched
        budget = self.budget
        while True:
            pc = th.pc
            if pc >= n:
                th.halted = True
                return
            if self.steps >= budget.max_steps:
                self._exceeded(f"{self.program.label!r} exceeded {budget.max_steps} steps")
            ins = ins_list[pc]
            op = ins.op
            a = ins.args
            nxt = pc + 1
            if op == "RECV":
                if not self.interactive:
                    raise PortFault(f"{self.program.label!r} executed RECV without a message environment")
                box = self.inbox[th.port]
                if not box:
                    th.blocked = True
                    return
                msg = box.popleft()
                th.msg = msg
                th.msg_pos = 0
                self.history.append(MessageRecord(self.stage, "in", msg.content, th.port, msg.tag, msg.sender))
            elif op == "HALT":
                self.steps += 1
                th.halted = True
                return
            elif op in _WRITES_FIRST:
                d = a[0]
                if op == "LOAD":
                    regs[d] = a[1]
                elif op == "MOV":
                    regs[d] = regs[a[1]]
                elif op == "ADD":
                    regs[d] = regs[a[1]] + regs[a[2]]
                elif op == "ADDI":
                    regs[d] = regs[a[1]] + a[2]
                elif op == "SUB":
                    regs[d] = regs[a[1]] - regs[a[2]]
                elif op == "MUL":
                    regs[d] = regs[a[1]] * regs[a[2]]
                elif op == "DIV":
                    b = regs[a[2]]
                    regs[d] = regs[a[1]] // b if b else 0
                elif op == "MOD":
                    b = regs[a[2]]
                    regs[d] = regs[a[1]] % b if b else 0
                elif op == "EQ":
                    regs[d] = int(regs[a[1]] == regs[a[2]])
                elif op == "LT":
                    regs[d] = int(regs[a[1]] < regs[a[2]])
                elif op == "READ_TYPE":
                    port = th.port
                    t = self.types[port]
                    p = self.type_pos[port]
                    if p < len(t):
                        regs[d] = symbol_code(t[p])
                        self.type_pos[port] = p + 1
                    else:
                        regs[d] = -1
                        self.type_end[port] = True
                elif op == "READ_RAND":
                    if self.tape_pos >= budget.max_rand_bits:
                        self._exceeded(f"{self.program.label!r} exceeded {budget.max_rand_bits} random bits",
                                       TapeExhausted)
                    if self.tape_pos >= len(self.tape):
                        self._exceeded(f"{self.program.label!r} read past the supplied tape", TapeExhausted)
                    regs[d] = 1 if self.tape[self.tape_pos] == "1" else 0
                    self.tape_pos += 1
                elif op == "READ_MSG":
                    m = th.msg
                    if m is not None and th.msg_pos < len(m.content):
                        regs[d] = symbol_code(m.content[th.msg_pos])
                        th.msg_pos += 1
                    else:
                        regs[d] = -1
                elif op == "MSG_TAG":
                    regs[d] = th.msg.tag if th.msg is not None else 0
                elif op == "MSG_FROM":
                    regs[d] = th.msg.sender if th.msg is not None else 0
                elif op == "POLL":
                    regs[d] = len(self.inbox[th.port])
                touched.add(d)
            elif op == "JMP":
                nxt = a[0]
            elif op == "JZ":
                if regs[a[0]] == 0:
                    nxt = a[1]
            elif op == "JNZ":
                if regs[a[0]] != 0:
                    nxt = a[1]
            elif op == "EMIT" or op == "EMITR":
                s = a[0] if op == "EMIT" else code_symbol(regs[a[0]])
                port = th.port
                self.out_len[port] += len(s)
                if self.out_len[port] > budget.max_output_bits:
                    self._exceeded(f"{self.program.label!r} exceeded {budget.max_output_bits} output symbols")
                self.outputs[port].append(s)
            elif op == "PUSH":
                th.outbuf.append(code_symbol(regs[a[0]]))
            elif op == "PUSHS":
                th.outbuf.append(a[0])
            elif op == "SEND" or op == "SENDS":
                if not self.interactive:
                    raise PortFault(f"{self.program.label!r} executed {op} without a message environment")
                if op == "SEND":
                    content = "".join(th.outbuf)
                    th.outbuf = []
                else:
                    content = a[0]
                self.sent_bits += len(content)
                sent.append((th.port, content))
                self.history.append(MessageRecord(self.stage, "out", content, th.port))
            elif op == "PORT":
                if not 0 <= a[0] < len(self.types):
                    raise InvalidProgram(f"PORT {a[0]} out of range")
                th.port = a[0]
            elif op == "SELECT":
                self.select = (self.steps + 1, self.tape_pos, a[0])
            self.steps += 1
            th.pc = nxt


class ScriptedPorts:
    """A fixed message environment for standalone runs.

    ``replies[k]`` is the list of messages delivered to port 0 at stage
    ``k + 2`` (nothing can arrive in the first stage).  Anything sent is
    collected in ``sent``.
    """

    def __init__(self, replies: Sequence[Sequence[Message]] = ()):
        self.replies = [list(r) for r in replies]
        self.sent = []

    def respond(self, stage, sent):
        self.sent.extend((stage, port, content) for port, content in sent)
        idx = stage - 1
        msgs = self.replies[idx] if idx < len(self.replies) else []
        return {0: msgs}


def run_machine(program: MachineProgram, type_input, tape: str = "",
                ports=None, budget: Optional[RunBudget] = None) -> RunResult:
    """Run ``program`` to completion and return ``(output, view, meter)``.

    ``type_input`` is a string, or a tuple of strings for a multi-port
    controller.  ``ports`` is a message environment with a
    ``respond(stage, sent) -> {port: [Message]}`` method; it is required
    only by programs that SEND or RECV.
    """
    budget = budget or RunBudget()
    types = (type_input,) if isinstance(type_input, str) else tuple(type_input)
    exe = Execution(program, types, tape, budget, interactive=ports is not None)
    sent = exe.advance(None)
    while not exe.done:
        deliveries = ports.respond(exe.stage, sent)
        sent = exe.advance(deliveries)
    if ports is not None and sent:
        ports.respond(exe.stage, sent)
    return exe.result()


def max_random_bits(program: MachineProgram, budget: RunBudget) -> int:
    """Upper bound on random bits read by any run within ``budget``.

    Longest-path count of reachable ``READ_RAND`` instructions over the
    control-flow graph, with at most ``max_steps`` instructions per path and
    capped by ``max_rand_bits``.  Multi-threaded programs sum their threads.
    """
    ins = program.instructions
    n = len(ins)
    if n == 0 or not any(i.op == "READ_RAND" for i in ins):
        return 0

    def succ(pc):
        op = ins[pc].op
        if op == "HALT":
            return ()
        if op == "JMP":
            return (ins[pc].args[0],)
        if op in ("JZ", "JNZ"):
            return (pc + 1, ins[pc].args[1])
        return (pc + 1,)

    # best[pc] = max READ_RAND count on a path of <= s steps starting at pc
    cap = budget.max_rand_bits
    best = [0] * (n + 1)
    for _ in range(budget.max_steps):
        new = [0] * (n + 1)
        for pc in range(n):
            gain = 1 if ins[pc].op == "READ_RAND" else 0
            nx = succ(pc)
            new[pc] = min(cap, gain + (max(best[s] for s in nx) if nx else 0))
        if new == best:
            break
        best = new
    total = sum(best[e] for e in program.entry_points)
    return min(total, budget.max_rand_bits)


# ---------------------------------------------------------------------------
# text format

_TOKEN = re.compile(r'"[^"]*"|\S+')


def parse_program(text: str, label: Optional[str] = None) -> MachineProgram:
    """Parse the line-oriented machine DSL.

    Header lines ``label: name``, ``registers: k`` and optionally
    ``entry: a, b`` precede the body.  ``;`` starts a comment, ``name:`` on
    its own defines a jump label, operands are ``r<k>``, integers, ``"text"``
    strings and label names (optionally prefixed with ``@``).
    """
    headers = {}
    body = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        m = re.fullmatch(r"(label|registers|entry)\s*:\s*(.*)", line)
        if m and not body:
            headers[m.group(1)] = (m.group(2).strip(), lineno)
            continue
        body.append((lineno, line))

    labels = {}
    instrs = []
    for lineno, line in body:
        m = re.fullmatch(r"([A-Za-z_][\w.]*)\s*:", line)
        if m:
            if m.group(1) in labels:
                raise DSLError(f"duplicate label {m.group(1)!r}", lineno)
            labels[m.group(1)] = len(instrs)
            continue
        instrs.append((lineno, _TOKEN.findall(line)))

    if "registers" not in headers:
        raise DSLError("missing 'registers:' header")
    try:
        nregs = int(headers["registers"][0])
    except ValueError:
        raise DSLError("registers must be an integer", headers["registers"][1]) from None
    name = label if label is not None else headers.get("label", ("",))[0]

    out = []
    for lineno, toks in instrs:
        op = toks[0].upper()
        kinds = OPCODES.get(op)
        if kinds is None:
            raise DSLError(f"unknown opcode {toks[0]!r}", lineno)
        ops = toks[1:]
        if len(ops) != len(kinds):
            raise DSLError(f"{op} expects {len(kinds)} operand(s), got {len(ops)}", lineno)
        args = []
        for kind, tok in zip(kinds, ops):
            args.append(_operand(kind, tok, labels, nregs, lineno))
        out.append(Instruction(op, tuple(args)))

    entries = (0,)
    if "entry" in headers:
        ent_text, ent_line = headers["entry"]
        entries = tuple(_target(t.strip(), labels, ent_line) for t in ent_text.split(","))
    try:
        return MachineProgram(tuple(out), nregs, name, entries)
    except InvalidProgram as exc:
        raise DSLError(str(exc)) from None


def _strip_comment(line):
    out = []
    quoted = False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        if ch == ";" and not quoted:
            break
        out.append(ch)
    return "".join(out)


def _target(tok, labels, lineno):
    tok = tok.lstrip("@")
    if tok in labels:
        return labels[tok]
    try:
        return int(tok)
    except ValueError:
        raise DSLError(f"unknown label {tok!r}", lineno) from None


def _operand(kind, tok, labels, nregs, lineno):
    if kind == "r":
        m = re.fullmatch(r"[rR](\d+)", tok)
        if not m:
            raise DSLError(f"register operand expected, got {tok!r}", lineno)
        r = int(m.group(1))
        if r >= nregs:
            raise DSLError(f"register r{r} not declared (registers: {nregs})", lineno)
        return r
    if kind == "i":
        try:
            return int(tok)
        except ValueError:
            raise DSLError(f"integer operand expected, got {tok!r}", lineno) from None
    if kind == "s":
        if len(tok) < 2 or tok[0] != '"' or tok[-1] != '"':
            raise DSLError(f"string operand expected, got {tok!r}", lineno)
        return tok[1:-1]
    return _target(tok, labels, lineno)


def format_program(program: MachineProgram) -> str:
    """Render a program in the DSL accepted by :func:`parse_program`."""
    targets = set(program.entry_points)
    for ins in program.instructions:
        kinds = OPCODES[ins.op]
        for kind, arg in zip(kinds, ins.args):
            if kind == "t":
                targets.add(arg)
    names = {t: f"L{t}" for t in sorted(targets)}
    lines = [f"label: {program.label}", f"registers: {program.register_count}"]
    if program.entry_points != (0,):
        lines.append("entry: " + ", ".join(names[e] for e in program.entry_points))
    for pc, ins in enumerate(program.instructions):
        if pc in names:
            lines.append(f"{names[pc]}:")
        kinds = OPCODES[ins.op]
        parts = [ins.op]
        for kind, arg in zip(kinds, ins.args):
            if kind == "r":
                parts.append(f"r{arg}")
            elif kind == "s":
                parts.append(f'"{arg}"')
            elif kind == "t":
                parts.append(names[arg])
            else:
                parts.append(str(arg))
        lines.append("  " + " ".join(parts))
    end = len(program.instructions)
    if end in names:
        lines.append(f"{names[end]}:")
    return "\n".join(lines) + "\n"


def relocate(program: MachineProgram, reg_offset: int, pc_offset: int,
             end_target: int) -> list:
    """Instructions of ``program`` shifted for embedding in a larger one.

    Register operands move by ``reg_offset`` and jump targets by
    ``pc_offset``; jumps to the end of ``program`` go to ``end_target``.  If
    the last instruction can fall through, a ``JMP end_target`` is appended.
    """
    end = len(program.instructions)
    out = []
    for ins in program.instructions:
        kinds = OPCODES[ins.op]
        args = []
        for kind, arg in zip(kinds, ins.args):
            if kind == "r":
                args.append(arg + reg_offset)
            elif kind == "t":
                args.append(end_target if arg == end else arg + pc_offset)
            else:
                args.append(arg)
        out.append(Instruction(ins.op, tuple(args)))
    if out and out[-1].op not in ("HALT", "JMP"):
        out.append(Instruction("JMP", (end_target,)))
    return out


def program(label: str, registers: int, *lines, entry=None) -> MachineProgram:
    """Build a program from DSL lines; convenience for library code."""
    text = [f"label: {label}", f"registers: {registers}"]
    if entry:
        text.append("entry: " + ", ".join(entry))
    text.extend(lines)
    return parse_program("\n".join(text))
