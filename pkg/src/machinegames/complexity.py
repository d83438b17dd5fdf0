"""Complexity functions: ``(machine, view) -> natural number``.

Every specification is evaluated to 0 on the do-nothing machine and to a
positive integer on every other machine.  Specs are declarative (a kind plus
parameters) so they can be stored in game files.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .errors import BudgetExceeded, ExactModeOverflow, InvalidSpec
from .profile import benign_components
from .tapes import DEFAULT_LIMIT, enumerate_tapes
from .vm import (
    BOT,
    MachineProgram,
    Message,
    RunBudget,
    RunMeter,
    ScriptedPorts,
    View,
    max_random_bits,
    run_machine,
)

KINDS = (
    "steps",
    "size",
    "rand_charge",
    "state_charge",
    "worst_case_plus_size",
    "coarse_threshold",
    "weighted_sum",
    "constant_for_protocol",
)

METER_FIELDS = ("steps", "program_size", "rand_bits", "registers_touched", "sent_bits", "state_bits")


def _freeze(value):
    if isinstance(value, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    if isinstance(value, (list, set, frozenset)):
        items = [_freeze(v) for v in value]
        return tuple(sorted(items) if isinstance(value, (set, frozenset)) else items)
    return value


@dataclass(frozen=True)
class ComplexityFnSpec:
    """Declarative complexity function.

    Parameters by kind:

    * ``rand_charge``: ``deterministic`` (default 1) and ``randomized``
      (default 2), the values for runs that read no / some random bits.
    * ``state_charge``: 1 for stateless runs, ``1 + weight * state_bits``
      otherwise (``weight`` default 2).
    * ``coarse_threshold``: 1 if the run took at most ``threshold`` steps,
      else 2.
    * ``weighted_sum``: ``offset + sum(weights[f] * meter.f)``.
    * ``worst_case_plus_size``: worst-case steps over all inputs of length
      ``input_length`` plus program size.
    * ``constant_for_protocol``: ``c0`` for programs labelled in ``labels``
      (and benign controllers made only of such programs), otherwise the
      ``fallback`` spec (steps by default).

    Any kind accepts ``free_randomization=True``: a run that executed
    ``SELECT`` is charged only for what happened after the selection, as if
    it had been the selected base machine.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown complexity kind {self.kind!r}")
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", _freeze(self.params))

    @classmethod
    def make(cls, kind, **params):
        return cls(kind, _freeze(params))

    def get(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    def as_dict(self):
        out = {"kind": self.kind}
        for k, v in self.params:
            if isinstance(v, ComplexityFnSpec):
                v = v.as_dict()
            elif isinstance(v, tuple) and v and all(isinstance(x, tuple) and len(x) == 2 for x in v):
                v = dict(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[k] = v
        return out

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        kind = doc.pop("kind")
        if "fallback" in doc and isinstance(doc["fallback"], dict):
            doc["fallback"] = cls.from_dict(doc["fallback"])
        if "labels" in doc:
            doc["labels"] = frozenset(doc["labels"])
        return cls.make(kind, **doc)


STEPS = ComplexityFnSpec("steps")


def _free_randomization_meter(meter: RunMeter) -> RunMeter:
    if meter.select_steps is None:
        return meter
    return replace(
        meter,
        steps=meter.steps - meter.select_steps,
        rand_bits=meter.rand_bits - meter.select_rand_bits,
        program_size=meter.selected_size,
    )


def evaluate_complexity(spec: ComplexityFnSpec, program: MachineProgram, view: View,
                        meter: RunMeter, nature_type: Optional[str] = None) -> int:
    """Complexity of ``program`` on the run described by ``view``/``meter``.

    ``nature_type`` is accepted so that game code can pass it uniformly; none
    of the built-in kinds depends on it.
    """
    if program == BOT:
        return 0
    if spec.get("free_randomization", False):
        meter = _free_randomization_meter(meter)
    kind = spec.kind
    if kind == "steps":
        value = max(1, meter.steps)
    elif kind == "size":
        value = max(1, meter.program_size)
    elif kind == "rand_charge":
        det = spec.get("deterministic", 1)
        rnd = spec.get("randomized", 2)
        value = rnd if meter.rand_bits > 0 else det
    elif kind == "state_charge":
        value = 1 + spec.get("weight", 2) * meter.state_bits
    elif kind == "coarse_threshold":
        value = 1 if meter.steps <= spec.get("threshold", 1) else 2
    elif kind == "weighted_sum":
        weights = dict(spec.get("weights", ()))
        unknown = set(weights) - set(METER_FIELDS)
        if unknown:
            raise InvalidSpec(f"unknown meter field(s) {sorted(unknown)}")
        value = spec.get("offset", 1) + sum(w * getattr(meter, f) for f, w in weights.items())
    elif kind == "worst_case_plus_size":
        n = spec.get("input_length")
        if n is None:
            raise InvalidSpec("worst_case_plus_size needs input_length")
        budget = RunBudget(max_steps=spec.get("max_steps", 10_000),
                           max_rand_bits=spec.get("max_rand_bits", 16))
        value = worst_case_complexity(spec, program, n, budget)
    elif kind == "constant_for_protocol":
        labels = spec.get("labels", frozenset())
        parts = benign_components(program.label)
        if program.label in labels or (parts and all(x in labels for x in parts)):
            value = spec.get("c0", 1)
        else:
            fallback = spec.get("fallback") or STEPS
            value = evaluate_complexity(fallback, program, view, meter, nature_type)
    else:  # pragma: no cover - guarded in __post_init__
        raise InvalidSpec(kind)
    if not isinstance(value, int) or value < 1:
        raise InvalidSpec(
            f"{kind} spec gives {value!r} on non-bot machine {program.label!r}; "
            "complexity must be a positive integer off bot")
    return value


_WORST_CACHE = {}


def worst_case_complexity(spec: ComplexityFnSpec, program: MachineProgram, input_length: int,
                          budget: RunBudget, limit: int = DEFAULT_LIMIT,
                          inputs: Optional[Iterable[str]] = None) -> int:
    """Worst-case steps over every type of ``input_length`` bits and every
    tape, plus program size.  ``inputs`` restricts the type set."""
    if program == BOT:
        return 0
    key = (program, input_length, budget, None if inputs is None else tuple(inputs))
    if key in _WORST_CACHE:
        return _WORST_CACHE[key]
    if inputs is None:
        if 2 ** input_length > limit:
            raise ExactModeOverflow(f"2^{input_length} inputs exceed the enumeration limit")
        inputs = ("".join(bits) for bits in itertools.product("01", repeat=input_length))
    cap = max_random_bits(program, budget)
    worst = 0
    runs = 0
    for t in inputs:
        for _tape, _w, res in enumerate_tapes(lambda tape: run_machine(program, t, tape, None, budget),
                                              cap, limit):
            runs += 1
            if runs > limit:
                raise ExactModeOverflow("worst-case enumeration exceeded the limit")
            if res is not None:
                worst = max(worst, res.meter.steps)
    value = worst + program.size
    _WORST_CACHE[key] = value
    return value


@dataclass
class ValidationReport:
    accepted: bool
    checked: int
    violations: list = field(default_factory=list)


_BATTERY_TYPES = ("", "0", "1", "01", "10", "1011", "0;1", "1111;0000")
_BATTERY_TAPES = ("", "0" * 16, "1" * 16, "01" * 8, "0110" * 4)
_BATTERY_REPLIES = ((), ((Message("1", 1),),), ((Message("0", 0, 2),), (Message("1", 1),)))


def _battery_runs(program: MachineProgram, budget: RunBudget):
    for t, tape in itertools.product(_BATTERY_TYPES, _BATTERY_TAPES):
        replies_set = _BATTERY_REPLIES if program.uses_ports else (None,)
        for replies in replies_set:
            ports = ScriptedPorts(replies) if replies is not None else None
            types = (t,) * max(1, program.thread_count)
            try:
                res = run_machine(program, types, tape, ports, budget)
            except BudgetExceeded:
                continue
            yield res


def validate_complexity_spec(spec: ComplexityFnSpec, probe_programs: Iterable[MachineProgram],
                             budget: Optional[RunBudget] = None) -> ValidationReport:
    """Probe the zero-on-bot law over a fixed battery of views."""
    probes = list(probe_programs)
    if BOT not in probes or all(p == BOT for p in probes):
        raise InvalidSpec("probe set must contain bot and at least one other program")
    budget = budget or RunBudget(max_steps=2_000, max_rand_bits=16)
    report = ValidationReport(True, 0)
    for prog in probes:
        for res in _battery_runs(prog, budget):
            report.checked += 1
            try:
                value = evaluate_complexity(spec, prog, res.view, res.meter)
            except InvalidSpec as exc:
                report.accepted = False
                report.violations.append((prog.label, res.view, str(exc)))
                continue
            if (value == 0) != (prog == BOT):
                report.accepted = False
                report.violations.append((prog.label, res.view, value))
    return report


def check_speedup(fast: ComplexityFnSpec, slow: ComplexityFnSpec, p, samples) -> list:
    """Pointwise check that ``fast`` is at most a ``p``-speedup of ``slow``.

    ``samples`` is an iterable of ``(program, view, meter, input_length)``;
    ``p(n, t)`` is a callable.  Returns the violating samples (empty when the
    relation holds on all of them).
    """
    bad = []
    for prog, view, meter, n in samples:
        c_fast = evaluate_complexity(fast, prog, view, meter)
        c_slow = evaluate_complexity(slow, prog, view, meter)
        if not (c_fast <= c_slow <= p(n, c_fast)):
            bad.append((prog.label, view, c_fast, c_slow))
    return bad
