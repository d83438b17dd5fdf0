"""Bayesian machine games and expected utilities.

A :class:`GameSpec` fixes the players, the type distribution (each profile
carries nature's type in the last slot), per-player and per-coalition
complexity specs and utilities ``u(t, a, c)``.  Expected utilities are
computed either exactly, by enumerating every type profile and every random
tape prefix, or by sampling with a Hoeffding confidence interval.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Optional, Union

from .complexity import ComplexityFnSpec, evaluate_complexity
from .errors import (
    ExactModeOverflow,
    InvalidSpec,
    ModeAssumptionViolated,
    ProbabilityNotOne,
    SchemaError,
    TapeExhausted,
)
from .expr import Expr
from .mediation import MEDIATOR, MediatorSpec, UnitRun, execute_units
from .profile import StrategyProfile, benign_coalition_machine, coalition, coalition_key
from .tapes import DEFAULT_LIMIT, enumerate_joint
from .vm import BOT, MachineProgram, RunBudget, max_random_bits, run_machine

Subject = Union[int, frozenset]


def _freeze(v):
    if isinstance(v, dict):
        return tuple(sorted((k, _freeze(x)) for k, x in v.items()))
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    return v


# ---------------------------------------------------------------------------
# utilities

@dataclass(frozen=True)
class ExprUtility:
    """Utility given by an expression over ``t1..tm, tN, a1..am, c1..cm``
    (also the tuples ``t``, ``a``, ``c``), the player index ``i``, the
    player count ``m`` and the game parameters.  Coalition utilities also
    see ``cZ`` and the member tuple ``Z``."""

    source: str

    def __post_init__(self):
        object.__setattr__(self, "source", Expr(self.source).source)

    @property
    def expr(self) -> Expr:
        return Expr(self.source)

    def __call__(self, t, a, c, params=(), i=0, cZ=None, Z=()):
        m = len(a)
        env = dict(params)
        for j in range(m):
            env[f"t{j + 1}"] = t[j]
            env[f"a{j + 1}"] = a[j]
            env[f"c{j + 1}"] = c[j]
        env["tN"] = t[m] if len(t) > m else ""
        env.update(t=tuple(t), a=tuple(a), c=tuple(c), m=m, i=i, Z=tuple(Z))
        if cZ is not None:
            env["cZ"] = cZ
        value = self.expr.evaluate(env)
        return Fraction(value)

    def complexity_names(self):
        return {n for n in self.expr.names if n == "c" or n == "cZ" or (n[:1] == "c" and n[1:].isdigit())}


@dataclass(frozen=True)
class SumUtility:
    """Default coalition utility: the members' utilities summed with each
    member's complexity replaced by the coalition's."""

    def __call__(self, game, t, a, c, cZ, Z):
        cc = list(c)
        for i in Z:
            cc[i - 1] = cZ
        return sum((game.utility(i, t, a, tuple(cc)) for i in Z), Fraction(0))


@dataclass(frozen=True)
class TableUtility:
    """Utility given by a table ``(type profile, action profile) -> value``
    with a fallback ``default``.  Tables ignore complexity; type profiles
    may omit nature's slot."""

    entries: tuple
    default: Optional[Fraction] = None

    def __post_init__(self):
        rows = self.entries.items() if isinstance(self.entries, dict) else self.entries
        object.__setattr__(self, "entries", tuple(sorted((
            (tuple(t), tuple(a)), Fraction(v)) for (t, a), v in rows)))
        if self.default is not None:
            object.__setattr__(self, "default", Fraction(self.default))

    def __call__(self, t, a, c, params=(), i=0, cZ=None, Z=()):
        table = dict(self.entries)
        t, a = tuple(t), tuple(a)
        for key in ((t, a), (t[:len(a)], a)):
            if key in table:
                return table[key]
        if self.default is None:
            raise SchemaError(f"utility table has no entry for types {t!r}, actions {a!r}")
        return self.default

    def complexity_names(self):
        return set()


def as_utility(u):
    if isinstance(u, (str, Expr)):
        return ExprUtility(str(u.source if isinstance(u, Expr) else u))
    if callable(u):
        return u
    raise SchemaError(f"cannot use {u!r} as a utility")


# ---------------------------------------------------------------------------
# game spec

@dataclass(frozen=True)
class GameSpec:
    name: str
    players: int
    input_length: int
    types: tuple
    machines: tuple = ()
    complexity: tuple = ()
    utilities: tuple = ()
    coalition_utilities: tuple = ()
    params: tuple = ()
    mediator: Optional[MediatorSpec] = None
    normalized: bool = False
    monotone: bool = False
    cheap: Optional[bool] = None
    utility_range: Optional[tuple] = None
    budget: RunBudget = field(default_factory=RunBudget)
    rand_cap: int = 8
    residual_tolerance: Fraction = Fraction(1, 16)
    coalitions: tuple = ()

    def __post_init__(self):
        if self.players < 1 or self.input_length < 0:
            raise SchemaError("players must be positive and input_length nonnegative")
        if len(self.utilities) != self.players:
            raise SchemaError(f"expected {self.players} utilities, got {len(self.utilities)}")
        total = Fraction(0)
        for prof, p in self.types:
            if len(prof) != self.players + 1:
                raise SchemaError(f"type profile {prof!r} must have {self.players + 1} slots")
            if p <= 0:
                raise SchemaError(f"type profile {prof!r} has nonpositive probability")
            total += p
        if total != 1:
            raise ProbabilityNotOne(f"type probabilities sum to {total}, not 1")
        if len({prof for prof, _ in self.types}) != len(self.types):
            raise SchemaError("duplicate type profile")
        labels = [m.label for m in self.machines]
        if len(set(labels)) != len(labels):
            raise SchemaError("machine labels must be unique")

    @classmethod
    def build(cls, *, name, players, input_length, types, utilities, machines=(),
              complexity=None, coalition_utilities=None, params=None, mediator=None,
              normalized=False, monotone=False, cheap=None, utility_range=None,
              budget=None, rand_cap=8, residual_tolerance=Fraction(1, 16), coalitions=()):
        tps = []
        for prof, p in (types.items() if isinstance(types, dict) else types):
            prof = tuple(prof)
            if len(prof) == players:
                prof = prof + ("",)
            tps.append((prof, Fraction(p)))
        comp = []
        for k, spec in (complexity or {"default": ComplexityFnSpec("steps")}).items():
            if isinstance(spec, dict):
                spec = ComplexityFnSpec.from_dict(spec)
            if k != "default" and not isinstance(k, int):
                k = coalition(k)
            comp.append((k, spec))
        comp.sort(key=lambda kv: (0, 0, ()) if kv[0] == "default" else
                  (1, kv[0], ()) if isinstance(kv[0], int) else (2, 0, coalition_key(kv[0])))
        cu = tuple(sorted(((coalition(z), as_utility(u)) for z, u in (coalition_utilities or {}).items()),
                          key=lambda zu: coalition_key(zu[0])))
        rng = None if utility_range is None else (Fraction(utility_range[0]), Fraction(utility_range[1]))
        return cls(
            name=name, players=players, input_length=input_length, types=tuple(tps),
            machines=tuple(machines), complexity=tuple(comp),
            utilities=tuple(as_utility(u) for u in utilities), coalition_utilities=cu,
            params=_freeze(dict(params or {})), mediator=mediator, normalized=normalized,
            monotone=monotone, cheap=cheap, utility_range=rng, budget=budget or RunBudget(),
            rand_cap=rand_cap, residual_tolerance=Fraction(residual_tolerance),
            coalitions=tuple(coalition(z) for z in coalitions),
        )

    # -- lookups -----------------------------------------------------------
    def machine(self, label: str) -> MachineProgram:
        if label in ("bot", "⊥"):
            return BOT
        for m in self.machines:
            if m.label == label:
                return m
        raise SchemaError(f"no machine labelled {label!r} in game {self.name!r}")

    def complexity_for(self, key) -> ComplexityFnSpec:
        table = dict(self.complexity)
        if not isinstance(key, int):
            key = coalition(key)
            if len(key) == 1 and key not in table:
                key = next(iter(key))
            elif key not in table:
                key = min(key)
        if key in table:
            return table[key]
        if "default" in table:
            return table["default"]
        raise InvalidSpec(f"no complexity spec for {key!r}")

    def utility(self, i: int, t, a, c) -> Fraction:
        return Fraction(self.utilities[i - 1](t, a, c, self.params, i))

    def coalition_utility(self, z, t, a, c, cZ) -> Fraction:
        z = coalition(z)
        for y, u in self.coalition_utilities:
            if y == z:
                if isinstance(u, ExprUtility):
                    return u(t, a, c, self.params, 0, cZ, coalition_key(z))
                return Fraction(u(self, t, a, c, cZ, coalition_key(z)))
        return SumUtility()(self, t, a, c, cZ, coalition_key(z))

    @property
    def is_cheap(self) -> bool:
        if self.cheap is not None:
            return self.cheap
        for u in self.utilities:
            if not isinstance(u, (ExprUtility, TableUtility)) or u.complexity_names():
                return False
        return True

    def depends_only_on_own_complexity(self, i: int) -> bool:
        u = self.utilities[i - 1]
        if not isinstance(u, (ExprUtility, TableUtility)):
            return True
        return u.complexity_names() <= {f"c{i}"}

    # -- derived games -----------------------------------------------------
    def with_mediator(self, mediator: Optional[MediatorSpec]) -> "GameSpec":
        return replace(self, mediator=mediator)

    def with_types(self, types) -> "GameSpec":
        tps = tuple((tuple(p) if len(p) == self.players + 1 else tuple(p) + ("",), Fraction(q))
                    for p, q in (types.items() if isinstance(types, dict) else types))
        return replace(self, types=tps)

    def with_complexity(self, overrides: dict) -> "GameSpec":
        table = dict(self.complexity)
        for k, spec in overrides.items():
            table[k if k == "default" or isinstance(k, int) else coalition(k)] = spec
        return replace(self, complexity=tuple(table.items()))

    def scaled(self, a, b=0) -> "GameSpec":
        """The game with every utility replaced by ``a * u + b``."""
        a, b = Fraction(a), Fraction(b)
        if a <= 0:
            raise SchemaError("scale factor must be positive")

        def wrap(u):
            if isinstance(u, ExprUtility):
                return ExprUtility(f"({a}) * ({u.source}) + ({b})")
            return _Scaled(u, a, b)

        utils = tuple(wrap(u) for u in self.utilities)
        cus = tuple((z, wrap(u)) for z, u in self.coalition_utilities)
        rng = None if self.utility_range is None else (a * self.utility_range[0] + b,
                                                       a * self.utility_range[1] + b)
        return replace(self, utilities=utils, coalition_utilities=cus, utility_range=rng,
                       normalized=False)


@dataclass(frozen=True)
class _Scaled:
    inner: object
    a: Fraction
    b: Fraction

    def __call__(self, *args, **kw):
        return self.a * Fraction(self.inner(*args, **kw)) + self.b


# ---------------------------------------------------------------------------
# playouts

@dataclass(frozen=True)
class Outcome:
    actions: tuple
    runs: tuple
    transcript: object = None


def _units(profile: StrategyProfile):
    return profile.units()


@lru_cache(maxsize=4096)
def _rand_cap(prog: MachineProgram, budget: RunBudget) -> int:
    return max_random_bits(prog, budget)


def _caps(game: GameSpec, profile: StrategyProfile, mediator) -> dict:
    caps = {}
    rounds = 1
    if mediator is not None and mediator.is_driver:
        rounds = int(mediator.param("rounds", 1))
    for key, prog, _ in _units(profile):
        caps[key] = min(_rand_cap(prog, game.budget) * rounds, game.rand_cap * rounds)
    if mediator is not None and mediator.rand_cap:
        caps[MEDIATOR] = mediator.rand_cap
    return caps


def playout(game: GameSpec, profile: StrategyProfile, types: tuple, tapes: dict,
            mediator=None) -> Outcome:
    """One deterministic play of ``profile`` on a type profile and tapes."""
    units = _units(profile)
    m = game.players
    if mediator is not None:
        tr = execute_units(units, mediator, types, tapes, game.budget, m)
        return Outcome(tr.outputs, tr.runs, tr)
    actions = [""] * m
    runs = []
    for key, prog, ports in units:
        try:
            res = run_machine(prog, tuple(types[i - 1] for i in ports), tapes.get(key, ""), None, game.budget)
        except TapeExhausted as exc:
            exc.participant = key
            raise
        for j, i in enumerate(ports):
            actions[i - 1] = res.outputs[j]
        runs.append(UnitRun(key, prog, ports, res.view, res.meter))
    return Outcome(tuple(actions), tuple(runs))


@lru_cache(maxsize=65536)
def _leaves(game_key, profile: StrategyProfile, types: tuple, mediator, limit: int):
    budget, rand_cap, players = game_key
    shim = _Shim(players, budget, rand_cap)
    caps = _caps(shim, profile, mediator)
    out = []
    resolved = Fraction(0)
    for tapes, w, res in enumerate_joint(lambda tp: playout(shim, profile, types, tp, mediator), caps, limit):
        if res is not None:
            out.append((w, res))
            resolved += w
    return tuple(out), resolved


@dataclass(frozen=True)
class _Shim:
    players: int
    budget: RunBudget
    rand_cap: int


def leaves(game: GameSpec, profile: StrategyProfile, types: tuple, mediator="game",
           limit: int = DEFAULT_LIMIT):
    """Resolved ``(weight, Outcome)`` leaves for one type profile and their
    total weight (1 minus the mass truncated by the rejection cap)."""
    med = game.mediator if mediator == "game" else mediator
    return _leaves((game.budget, game.rand_cap, game.players), profile, tuple(types), med, limit)


def complexities(game: GameSpec, outcome: Outcome, nature: str = ""):
    """Per-player complexities; members of a coalition all get ``c_Z``.
    Returns ``(c, {unit_key: value})``."""
    c = [0] * game.players
    by_unit = {}
    for run in outcome.runs:
        key = run.key
        spec = game.complexity_for(key if isinstance(key, int) else frozenset(key))
        value = evaluate_complexity(spec, run.program, run.view, run.meter, nature)
        by_unit[key] = value
        for i in run.ports:
            c[i - 1] = value
    return tuple(c), by_unit


def subject_value(game: GameSpec, types: tuple, outcome: Outcome, subject: Subject,
                  transform=None) -> Fraction:
    c, by_unit = complexities(game, outcome, types[game.players])
    if isinstance(subject, int):
        if transform is not None:
            c = list(c)
            c[subject - 1] = transform(c[subject - 1])
            c = tuple(c)
        value = game.utility(subject, types, outcome.actions, c)
    else:
        key = coalition_key(subject)
        cZ = by_unit[key]
        if transform is not None:
            cZ = transform(cZ)
            c = tuple(cZ if i in subject else x for i, x in enumerate(c, 1))
        value = game.coalition_utility(subject, types, outcome.actions, c, cZ)
    if game.normalized and not 0 <= value <= 1:
        raise SchemaError(f"normalized game {game.name!r} produced utility {value}")
    return value


# ---------------------------------------------------------------------------
# expected utility

@dataclass(frozen=True)
class UtilityOutcome:
    mode: str
    value: Optional[Fraction] = None
    estimate: Optional[float] = None
    half_width: Optional[float] = None
    confidence: Optional[float] = None
    samples: Optional[int] = None
    seed: Optional[int] = None
    residual: Fraction = Fraction(0)

    @property
    def point(self):
        return self.value if self.mode == "exact" else self.estimate

    def as_dict(self) -> dict:
        from .expr import format_rational

        if self.mode == "exact":
            return {"mode": "exact", "value": format_rational(self.value),
                    "residual": format_rational(self.residual)}
        return {"mode": "sampled", "estimate": repr(self.estimate), "half_width": repr(self.half_width),
                "confidence": self.confidence, "samples": self.samples, "seed": self.seed}


def prepare_profile(profile: StrategyProfile, subject: Subject) -> StrategyProfile:
    if isinstance(subject, int):
        return profile
    z = coalition(subject)
    if len(z) > 1 and profile.controller(z) is None:
        return profile.with_coalition(z, benign_coalition_machine(profile, z))
    if len(z) == 1 and profile.controller(z) is None:
        return profile.with_coalition(z, benign_coalition_machine(profile, z))
    return profile


def hoeffding_half_width(lo, hi, n: int, confidence: float) -> float:
    return float(hi - lo) * math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


def expected_utility(game: GameSpec, profile: StrategyProfile, subject: Subject = 1,
                     mode: str = "exact", *, seed: Optional[int] = None, samples: int = 10_000,
                     confidence: float = 0.99, transform=None, mediator="game",
                     limit: int = DEFAULT_LIMIT) -> UtilityOutcome:
    """Expected utility of ``subject`` (a player index or a coalition).

    Exact mode conditions on the tapes resolved within the rejection cap and
    reports the truncated mass as ``residual``; it fails with
    :class:`ExactModeOverflow` if that mass exceeds the game's tolerance.
    ``transform`` rewrites the subject's complexity before the utility sees
    it (used for speedup checks).
    """
    if not isinstance(subject, int):
        subject = coalition(subject)
    profile = prepare_profile(profile, subject)
    if mode == "exact":
        total = Fraction(0)
        residual = Fraction(0)
        for types, p in game.types:
            lv, resolved = leaves(game, profile, types, mediator, limit)
            if resolved == 0:
                raise ExactModeOverflow(f"no tape resolved within the cap for types {types!r}")
            residual += p * (1 - resolved)
            acc = Fraction(0)
            for w, outcome in lv:
                acc += w * subject_value(game, types, outcome, subject, transform)
            total += p * acc / resolved
        if residual > game.residual_tolerance:
            raise ExactModeOverflow(f"truncated mass {residual} exceeds tolerance {game.residual_tolerance}")
        return UtilityOutcome("exact", value=total, residual=residual)
    if mode != "sampled":
        raise SchemaError(f"unknown mode {mode!r}")
    if seed is None:
        raise SchemaError("sampled mode needs a seed")
    lo_hi = game.utility_range or ((Fraction(0), Fraction(1)) if game.normalized else None)
    if lo_hi is None:
        raise ModeAssumptionViolated("sampled mode needs normalized utilities or a declared utility_range")
    est = _sample_mean(game, profile, subject, transform, mediator, seed, samples)
    hw = hoeffding_half_width(lo_hi[0], lo_hi[1], samples, confidence)
    return UtilityOutcome("sampled", estimate=est, half_width=hw, confidence=confidence,
                          samples=samples, seed=seed)


class _Sampler:
    """Draws plays by flipping tape bits on demand, memoizing every tape
    prefix already explored so repeated draws are cheap."""

    def __init__(self, game, profile, mediator):
        self.game = game
        self.profile = profile
        self.mediator = game.mediator if mediator == "game" else mediator
        self.caps = _caps(game, profile, self.mediator)
        self.order = tuple(self.caps)
        self.trie = {}

    def draw(self, tidx, types, rng):
        tapes = {k: "" for k in self.order}
        while True:
            key = (tidx,) + tuple(tapes[k] for k in self.order)
            node = self.trie.get(key)
            if node is None:
                try:
                    node = ("leaf", playout(self.game, self.profile, types, tapes, self.mediator), key)
                except TapeExhausted as exc:
                    who = exc.participant
                    if who in self.caps and len(tapes[who]) < self.caps[who]:
                        node = ("branch", who)
                    else:
                        node = ("unresolved",)
                self.trie[key] = node
            kind = node[0]
            if kind == "leaf":
                return node
            if kind == "branch":
                tapes[node[1]] += "1" if rng.getrandbits(1) else "0"
            else:
                tapes = {k: "" for k in self.order}


_SAMPLERS = {}


def _sample_mean(game, profile, subject, transform, mediator, seed, n) -> float:
    skey = (game.budget, game.rand_cap, game.players, profile, mediator if mediator != "game" else game.mediator)
    sampler = _SAMPLERS.get(skey)
    if sampler is None:
        if len(_SAMPLERS) > 256:
            _SAMPLERS.clear()
        sampler = _SAMPLERS[skey] = _Sampler(game, profile, mediator)
    rng = random.Random(seed)
    denom = reduce(lambda x, y: x * y // math.gcd(x, y), (p.denominator for _, p in game.types), 1)
    cum = []
    acc = 0
    for _, p in game.types:
        acc += int(p * denom)
        cum.append(acc)
    values = {}
    total = 0.0
    for _ in range(n):
        tidx = bisect.bisect_right(cum, rng.randrange(denom))
        types = game.types[tidx][0]
        node = sampler.draw(tidx, types, rng)
        v = values.get(node[2])
        if v is None:
            v = values[node[2]] = float(subject_value(game, types, node[1], subject, transform))
        total += v
    return total / n


# ---------------------------------------------------------------------------
# action distributions

def action_distribution(game: GameSpec, profile: StrategyProfile, mediator="game",
                        limit: int = DEFAULT_LIMIT) -> dict:
    """Exact law of the action profile for every type profile, conditioned
    on the tapes resolved within the rejection cap."""
    out = {}
    for types, _ in game.types:
        lv, resolved = leaves(game, profile, types, mediator, limit)
        if resolved == 0:
            raise ExactModeOverflow(f"no tape resolved within the cap for types {types!r}")
        dist = {}
        for w, outcome in lv:
            dist[outcome.actions] = dist.get(outcome.actions, Fraction(0)) + w / resolved
        out[types] = dict(sorted(dist.items()))
    return out


def total_variation(p: dict, q: dict) -> Fraction:
    keys = set(p) | set(q)
    return sum((abs(p.get(k, Fraction(0)) - q.get(k, Fraction(0))) for k in keys), Fraction(0)) / 2


def clear_caches() -> None:
    _leaves.cache_clear()
    _SAMPLERS.clear()
