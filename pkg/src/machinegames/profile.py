"""Machine profiles and coalition controllers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import InvalidProgram, SchemaError
from .vm import MachineProgram, relocate


def coalition(members: Iterable[int]) -> frozenset:
    z = frozenset(int(i) for i in members)
    if not z:
        raise SchemaError("a coalition needs at least one member")
    return z


def coalition_key(z) -> tuple:
    return tuple(sorted(z))


@dataclass(frozen=True)
class StrategyProfile:
    """One program per player (1-based indices in the public API), plus
    optional controllers that take over whole coalitions."""

    assignment: tuple
    coalition_overrides: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(self.assignment))
        over = self.coalition_overrides
        if isinstance(over, dict):
            over = over.items()
        over = tuple(sorted(((coalition(z), p) for z, p in over), key=lambda zp: coalition_key(zp[0])))
        seen = set()
        for z, _ in over:
            if seen & z:
                raise SchemaError("coalition overrides must be disjoint")
            if max(z) > len(self.assignment) or min(z) < 1:
                raise SchemaError(f"coalition {sorted(z)} names an unknown player")
            seen |= z
        object.__setattr__(self, "coalition_overrides", over)

    @property
    def players(self) -> int:
        return len(self.assignment)

    def machine(self, i: int) -> MachineProgram:
        return self.assignment[i - 1]

    def with_player(self, i: int, prog: MachineProgram) -> "StrategyProfile":
        a = list(self.assignment)
        a[i - 1] = prog
        return StrategyProfile(tuple(a), self.coalition_overrides)

    def with_coalition(self, z, prog: MachineProgram) -> "StrategyProfile":
        z = coalition(z)
        rest = tuple((y, p) for y, p in self.coalition_overrides if not (y & z))
        return StrategyProfile(self.assignment, rest + ((z, prog),))

    def controller(self, z):
        z = coalition(z)
        for y, p in self.coalition_overrides:
            if y == z:
                return p
        return None

    def units(self) -> list:
        """``(key, program, ports)`` for every independently running machine,
        ordered by smallest member.  ``key`` is the player index for an
        individual and the sorted member tuple for a coalition."""
        covered = {}
        for z, p in self.coalition_overrides:
            covered[min(z)] = (coalition_key(z), p, coalition_key(z))
        taken = set().union(*(z for z, _ in self.coalition_overrides)) if self.coalition_overrides else set()
        out = []
        for i in range(1, self.players + 1):
            if i in covered:
                out.append(covered[i])
            elif i not in taken:
                out.append((i, self.assignment[i - 1], (i,)))
        return out

    @property
    def labels(self) -> tuple:
        return tuple(p.label for p in self.assignment)


def _falls_through(prog: MachineProgram) -> bool:
    return bool(prog.instructions) and prog.instructions[-1].op not in ("HALT", "JMP")


def compose_threads(members: list, label: str) -> MachineProgram:
    """Place single-threaded programs side by side as threads of one program.

    Registers and jump targets are shifted so the members never interfere;
    a jump to a member's end becomes a jump to the end of the whole program.
    Every member except the last gets a closing ``JMP`` when its last
    instruction could fall through (one extra step for that member).
    """
    for p in members:
        if p.thread_count != 1 or p.entry_points != (0,):
            raise InvalidProgram(f"{p.label!r} is not a single-thread program")
    lengths = []
    for idx, p in enumerate(members):
        extra = 1 if _falls_through(p) and idx < len(members) - 1 else 0
        lengths.append(p.size + extra)
    total = sum(lengths)
    code = []
    entries = []
    reg = 0
    for idx, p in enumerate(members):
        start = len(code)
        entries.append(start if p.size else total)
        block = relocate(p, reg, start, total)
        if idx == len(members) - 1 and len(block) > p.size:
            block = block[: p.size]
        code.extend(block)
        reg += p.register_count
    assert len(code) == total
    return MachineProgram(tuple(code), reg, label, tuple(entries))


def benign_label(labels) -> str:
    return "benign(" + ",".join(labels) + ")"


def benign_components(label: str):
    """Member labels of a benign controller label, or None."""
    if label.startswith("benign(") and label.endswith(")"):
        inner = label[len("benign("):-1]
        return tuple(inner.split(",")) if inner else ()
    return None


def benign_coalition_machine(profile: StrategyProfile, z) -> MachineProgram:
    """The controller that runs each member's own machine on the member's
    own input and passes its output through unchanged."""
    members = coalition_key(coalition(z))
    progs = [profile.machine(i) for i in members]
    return compose_threads(progs, benign_label(p.label for p in progs))

