"""Equilibrium checks over declared finite candidate classes.

Every quantifier over machines is discharged over a :class:`CandidateClass`
and each report names the class it was decided on.  A verdict holds iff the
largest gap is at most epsilon, so ties hold.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .complexity import check_speedup, evaluate_complexity
from .errors import (
    BudgetExceeded,
    InvalidSpec,
    ModeAssumptionViolated,
    SchemaError,
    StageLimitExceeded,
)
from .expr import Expr, format_rational
from .game import (
    GameSpec,
    action_distribution,
    expected_utility,
    leaves,
    prepare_profile,
    subject_value,
    total_variation,
)
from .mediation import MediatorSpec, lambda_machine
from .profile import (
    StrategyProfile,
    benign_coalition_machine,
    coalition,
    coalition_key,
    compose_threads,
)
from .vm import BOT, MachineProgram

WORKERS_ENV = "MACHINEGAMES_WORKERS"


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _subject_name(subject) -> str:
    if isinstance(subject, int):
        return str(subject)
    return "{" + ",".join(str(i) for i in coalition_key(subject)) + "}"


def _fmt(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, float):
        return repr(v)
    return v


# ---------------------------------------------------------------------------
# candidate classes and speedups

@dataclass(frozen=True)
class CandidateClass:
    """Deviations per player and per coalition.  ``⊥`` and the incumbent are
    always added when the class is used in a check."""

    label: str
    players: tuple = ()
    coalitions: tuple = ()
    product_limit: int = 20_000

    @classmethod
    def make(cls, label: str, players: dict, coalitions: Optional[dict] = None, **kw):
        pl = tuple(sorted((int(i), tuple(ps)) for i, ps in players.items()))
        co = tuple(sorted(((coalition(z), tuple(ps)) for z, ps in (coalitions or {}).items()),
                          key=lambda zp: coalition_key(zp[0])))
        return cls(label, pl, co, **kw)

    @classmethod
    def uniform(cls, label: str, programs: Sequence[MachineProgram], players: int):
        return cls.make(label, {i: tuple(programs) for i in range(1, players + 1)})

    def for_player(self, i: int) -> tuple:
        return dict(self.players).get(i, ())

    def for_coalition(self, z) -> Optional[tuple]:
        return dict(self.coalitions).get(coalition(z))

    def members(self, subject, incumbent: MachineProgram, profile: StrategyProfile) -> list:
        if isinstance(subject, int):
            declared = self.for_player(subject)
        else:
            declared = self.for_coalition(subject)
            if declared is None:
                declared = self._products(subject, profile)
        return _dedupe([BOT, *declared, incumbent])

    def _products(self, z, profile):
        members = coalition_key(z)
        pools = [_dedupe([BOT, *self.for_player(i), profile.machine(i)]) for i in members]
        size = 1
        for p in pools:
            size *= len(p)
        if size > self.product_limit:
            raise SchemaError(f"coalition {list(members)} product class has {size} members; declare one")
        out = []
        for combo in itertools.product(*pools):
            out.append(compose_threads(list(combo), "joint(" + ",".join(p.label for p in combo) + ")"))
        return out


def _dedupe(programs):
    seen = set()
    out = []
    for p in programs:
        key = (p.instructions, p.register_count, p.entry_points, p.label)
        if key not in seen:
            seen.add(key)
            out.append(p)
    return out


@dataclass(frozen=True)
class SpeedupSpec:
    """A speedup bound ``p(n, t)`` and how robustness is checked.

    ``favorable_deviator`` charges each deviation ``min{x >= 1 : p(n, x) >=
    c}`` instead of ``c`` (0 stays 0).  ``explicit_list`` re-checks the
    equilibrium in every listed sped-up game, each given as a map from
    player/coalition keys to replacement complexity specs.
    """

    p: str = "t"
    mode: str = "favorable_deviator"
    speedups: tuple = ()
    homogeneous: bool = False

    def __post_init__(self):
        if self.mode not in ("favorable_deviator", "explicit_list"):
            raise SchemaError(f"unknown speedup mode {self.mode!r}")
        Expr(self.p)

    def __call__(self, n: int, t: int) -> int:
        v = Expr(self.p).evaluate(n=n, t=t)
        return int(v) if Fraction(v).denominator == 1 else int(Fraction(v).__ceil__())

    def validate(self, n: int, horizon: int = 256) -> None:
        prev = None
        for t in range(horizon + 1):
            v = self(n, t)
            if prev is not None and v < prev:
                raise InvalidSpec(f"p({n}, t) decreases at t={t}")
            prev = v
        if self.homogeneous and self(n, 0) != 0:
            raise InvalidSpec("homogeneous speedup needs p(n, 0) = 0")

    def transform(self, n: int) -> Callable[[int], int]:
        cache = {}

        def charge(c: int) -> int:
            if c == 0:
                return 0
            if c in cache:
                return cache[c]
            lo, hi = 1, max(1, c)
            if self(n, hi) < c:
                raise InvalidSpec(f"p({n}, {hi}) < {c}: not a speedup bound")
            while lo < hi:
                mid = (lo + hi) // 2
                if self(n, mid) >= c:
                    hi = mid
                else:
                    lo = mid + 1
            cache[c] = lo
            return lo

        return charge


IDENTITY = SpeedupSpec("t")


# ---------------------------------------------------------------------------
# reports

@dataclass
class GapEntry:
    label: str
    utility: object = None
    gap: object = None
    rejected: Optional[str] = None


@dataclass
class SubjectReport:
    subject: object
    incumbent: str
    incumbent_utility: object
    max_gap: object
    witness: Optional[str]
    entries: list
    epsilon: Fraction = Fraction(0)
    half_width: Optional[float] = None

    @property
    def holds(self) -> bool:
        return self.max_gap is None or self.max_gap <= self.epsilon

    def __iter__(self):
        return iter((self.max_gap, self.witness))

    def gap_of(self, label: str):
        for e in self.entries:
            if e.label == label:
                return e.gap
        raise KeyError(label)

    def as_dict(self) -> dict:
        return {
            "subject": _subject_name(self.subject),
            "incumbent": self.incumbent,
            "incumbent_utility": _fmt(self.incumbent_utility),
            "max_gap": _fmt(self.max_gap),
            "witness": self.witness,
            "holds": self.holds,
            "gaps": [
                {"candidate": e.label, "utility": _fmt(e.utility), "gap": _fmt(e.gap)}
                if e.rejected is None else {"candidate": e.label, "rejected": e.rejected}
                for e in self.entries
            ],
        }


@dataclass
class EquilibriumReport:
    check: str
    holds: bool
    epsilon: Fraction
    class_label: str
    mode: str = "exact"
    subjects: list = field(default_factory=list)
    clauses: dict = field(default_factory=dict)
    children: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def witness(self):
        for s in self.subjects:
            if not s.holds:
                return s.subject, s.witness, s.max_gap
        return None

    def subject(self, subject) -> SubjectReport:
        for s in self.subjects:
            if s.subject == subject or (not isinstance(subject, int) and s.subject == coalition(subject)):
                return s
        raise KeyError(subject)

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "holds": self.holds,
            "epsilon": format_rational(self.epsilon),
            "candidate_class": self.class_label,
            "mode": self.mode,
            "clauses": dict(self.clauses),
            "subjects": [s.as_dict() for s in self.subjects],
            "children": [c.as_dict() for c in self.children],
            "notes": list(self.notes),
            "details": _plain(self.details),
        }


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return _fmt(v)


# ---------------------------------------------------------------------------
# best responses

def _deviate(profile: StrategyProfile, subject, prog: MachineProgram) -> StrategyProfile:
    if isinstance(subject, int):
        return profile.with_player(subject, prog)
    return profile.with_coalition(subject, prog)


def _incumbent(profile: StrategyProfile, subject) -> MachineProgram:
    if isinstance(subject, int):
        return profile.machine(subject)
    ctl = profile.controller(subject)
    return ctl if ctl is not None else benign_coalition_machine(profile, subject)


def _value(game, profile, subject, mode, transform, sample_kw):
    out = expected_utility(game, profile, subject, mode, transform=transform, **sample_kw)
    return out.point, out.half_width


def best_response_gap(game: GameSpec, profile: StrategyProfile, subject, candidates,
                      mode: str = "exact", *, epsilon=Fraction(0), transform=None,
                      incumbent: Optional[MachineProgram] = None, **sample_kw) -> SubjectReport:
    """Largest ``U(M', rest) - U(incumbent, rest)`` over the candidates.

    ``candidates`` is a :class:`CandidateClass` (``⊥`` and the incumbent
    added) or a plain sequence of programs evaluated exactly as given.  For
    a coalition the incumbent is the benign controller unless ``incumbent``
    is supplied.  ``transform`` rewrites each deviation's complexity.
    Candidates that overrun the step budget are reported as rejected.
    """
    if not isinstance(subject, int):
        subject = coalition(subject)
        if len(subject) == 1 and not game.coalition_utilities and incumbent is None:
            subject = next(iter(subject))
    inc = incumbent if incumbent is not None else _incumbent(profile, subject)
    base = _deviate(profile, subject, inc)
    if isinstance(candidates, CandidateClass):
        pool = candidates.members(subject, inc, profile)
    else:
        pool = list(candidates)
    u0, hw0 = _value(game, base, subject, mode, None, sample_kw)

    def one(prog):
        if prog == inc:
            return GapEntry(prog.label, u0, u0 - u0)
        try:
            u, _ = _value(game, _deviate(profile, subject, prog), subject, mode, transform, sample_kw)
        except (BudgetExceeded, StageLimitExceeded) as exc:
            return GapEntry(prog.label, rejected=f"{type(exc).__name__}: {exc}")
        return GapEntry(prog.label, u, u - u0)

    workers = _workers()
    if workers > 1 and len(pool) > 1:
        with ThreadPoolExecutor(workers) as ex:
            entries = list(ex.map(one, pool))
    else:
        entries = [one(p) for p in pool]
    # ties go to the incumbent, then to declaration order
    best, witness = u0 - u0, inc.label
    for e in entries:
        if e.rejected is None and e.gap > best:
            best, witness = e.gap, e.label
    hw = None if hw0 is None else 2 * hw0
    return SubjectReport(subject, inc.label, u0, best, witness, entries, Fraction(epsilon), hw)


def _class_label(candidates) -> str:
    if isinstance(candidates, CandidateClass):
        return candidates.label
    return "explicit[" + ",".join(p.label for p in candidates) + "]"


def check_epsilon_nash(game: GameSpec, profile: StrategyProfile, epsilon, candidates,
                       mode: str = "exact", *, transform=None, **sample_kw) -> EquilibriumReport:
    """Every player's incumbent is an epsilon-best response."""
    epsilon = Fraction(epsilon)
    subjects = [best_response_gap(game, profile, i, candidates, mode, epsilon=epsilon,
                                  transform=transform, **sample_kw)
                for i in range(1, game.players + 1)]
    return EquilibriumReport("epsilon_nash", all(s.holds for s in subjects), epsilon,
                             _class_label(candidates), mode, subjects)


def check_coalition_safe(game: GameSpec, profile: StrategyProfile, coalitions, epsilon, candidates,
                         mode: str = "exact", *, transform=None, **sample_kw) -> EquilibriumReport:
    """For every ``Z`` listed, the benign controller is an epsilon-best
    response for ``Z``.  Singletons are decided exactly as in the Nash
    check."""
    epsilon = Fraction(epsilon)
    subjects = []
    for z in coalitions:
        z = coalition(z)
        subj = next(iter(z)) if len(z) == 1 else z
        subjects.append(best_response_gap(game, profile, subj, candidates, mode, epsilon=epsilon,
                                          transform=transform, **sample_kw))
    rep = EquilibriumReport("coalition_safe", all(s.holds for s in subjects), epsilon,
                            _class_label(candidates), mode, subjects)
    rep.details["coalitions"] = [_subject_name(coalition(z)) for z in coalitions]
    return rep


def _verify_monotone(game: GameSpec, profile: StrategyProfile, subjects) -> None:
    if not game.monotone:
        raise ModeAssumptionViolated("favorable_deviator mode needs a game flagged monotone")
    for i in range(1, game.players + 1):
        if not game.depends_only_on_own_complexity(i):
            raise ModeAssumptionViolated(f"player {i}'s utility reads other players' complexities")
    for subject in subjects:
        prof = prepare_profile(profile, subject)
        for types, _ in game.types:
            lv, _ = leaves(game, prof, types)
            for _, outcome in lv:
                for bump in (1, 2, 7):
                    lo = subject_value(game, types, outcome, subject)
                    hi = subject_value(game, types, outcome, subject, transform=lambda c, b=bump: c + b)
                    if hi > lo:
                        raise ModeAssumptionViolated(
                            f"utility of {_subject_name(subject)} increases with complexity at {types!r}")


def check_p_robust(game: GameSpec, profile: StrategyProfile, p: SpeedupSpec, epsilon, candidates,
                   mode: str = "exact", *, coalitions=None, **sample_kw) -> EquilibriumReport:
    """p-robust epsilon-equilibrium (coalition-safe for ``coalitions`` if
    given, otherwise Nash)."""
    epsilon = Fraction(epsilon)
    p.validate(game.input_length)
    zs = [coalition(z) for z in coalitions] if coalitions is not None else \
        [frozenset({i}) for i in range(1, game.players + 1)]
    subj = [next(iter(z)) if len(z) == 1 else z for z in zs]
    if p.mode == "favorable_deviator":
        _verify_monotone(game, profile, subj)
        rep = check_coalition_safe(game, profile, zs, epsilon, candidates, mode,
                                   transform=p.transform(game.input_length), **sample_kw)
        rep.check = "p_robust"
        rep.details["p"] = p.p
        rep.details["speedup_mode"] = p.mode
        return rep
    children = [check_coalition_safe(game, profile, zs, epsilon, candidates, mode, **sample_kw)]
    for idx, overrides in enumerate(p.speedups):
        overrides = dict(overrides)
        _verify_listed_speedup(game, profile, overrides, p, candidates, subj)
        g2 = game.with_complexity(overrides)
        child = check_coalition_safe(g2, profile, zs, epsilon, candidates, mode, **sample_kw)
        child.details["speedup_index"] = idx
        children.append(child)
    rep = EquilibriumReport("p_robust", all(c.holds for c in children), epsilon, _class_label(candidates),
                            mode, children[0].subjects, children=children[1:])
    rep.details["p"] = p.p
    rep.details["speedup_mode"] = p.mode
    return rep


def _verify_listed_speedup(game, profile, overrides, p, candidates, subjects):
    """Pointwise check of each listed spec against the game's own spec on
    every run reachable from the incumbent and its deviations."""
    samples = {}
    for subject in subjects:
        inc = _incumbent(profile, subject)
        pool = candidates.members(subject, inc, profile) if isinstance(candidates, CandidateClass) \
            else list(candidates) + [inc]
        for prog in pool:
            prof = prepare_profile(_deviate(profile, subject, prog), subject)
            for types, _ in game.types:
                try:
                    lv, _ = leaves(game, prof, types)
                except (BudgetExceeded, StageLimitExceeded):
                    continue
                for _, outcome in lv:
                    for run in outcome.runs:
                        key = run.key if isinstance(run.key, int) else frozenset(run.key)
                        samples.setdefault(key, []).append((run.program, run.view, run.meter, game.input_length))
    for key, fast in overrides.items():
        k = key if key == "default" or isinstance(key, int) else coalition(key)
        targets = samples.keys() if k == "default" else [k]
        for t in targets:
            slow = game.complexity_for(t)
            bad = check_speedup(fast, slow, lambda n, c: p(n, c), samples.get(t, []))
            if bad:
                raise ModeAssumptionViolated(f"listed spec for {key!r} is not a p-speedup: {bad[0][:2]}")


# ---------------------------------------------------------------------------
# protocol checks

def _lambda_profile(F: MediatorSpec, players: int) -> StrategyProfile:
    lam = lambda_machine(F.identity)
    return StrategyProfile(tuple(lam for _ in range(players)))


def _controller_runs(game, profile, z):
    """Every resolved run of the machine controlling ``z`` (its own program
    for a singleton, the benign controller otherwise)."""
    z = coalition(z)
    prof = profile if len(z) == 1 else prepare_profile(profile, z)
    key = next(iter(z)) if len(z) == 1 else coalition_key(z)
    for types, _ in game.types:
        lv, _ = leaves(game, prof, types)
        for _, outcome in lv:
            for run in outcome.runs:
                if run.key == key:
                    yield types, run


def check_M_acceptable(game: GameSpec, M_profile: StrategyProfile, F: MediatorSpec,
                       F_prime: Optional[MediatorSpec] = None, coalitions=None,
                       c0: Optional[int] = None) -> EquilibriumReport:
    """Both the canonical protocol's and ``M_profile``'s controllers have
    the same complexity ``c0`` on every enumerated view."""
    zs = [coalition(z) for z in coalitions] if coalitions else \
        [frozenset({i}) for i in range(1, game.players + 1)]
    g_f = game.with_mediator(F)
    g_fp = game.with_mediator(F_prime if F_prime is not None else (game.mediator or F))
    lam = _lambda_profile(F, game.players)
    witness = None
    checked = 0
    for z in zs:
        spec_key = next(iter(z)) if len(z) == 1 else z
        spec = game.complexity_for(spec_key)
        for which, g, prof in (("lambda", g_f, lam), ("protocol", g_fp, M_profile)):
            for types, run in _controller_runs(g, prof, z):
                value = evaluate_complexity(spec, run.program, run.view, run.meter, types[game.players])
                checked += 1
                if c0 is None:
                    c0 = value
                if value != c0 or value == 0:
                    witness = {"coalition": _subject_name(z), "machine": which, "label": run.program.label,
                               "types": list(types), "complexity": value, "c0": c0,
                               "view_random_prefix": run.view.random_prefix,
                               "view_type_prefix": list(run.view.type_prefix)}
                    break
            if witness:
                break
        if witness:
            break
    rep = EquilibriumReport("M_acceptable", witness is None, Fraction(0), "n/a", "exact")
    rep.details.update(c0=c0, views_checked=checked)
    if witness:
        rep.details["witness"] = witness
    return rep


def _subsets(coalitions, cap):
    zs = [coalition(z) for z in coalitions]
    cap = len(zs) if cap is None else min(cap, len(zs))
    for r in range(cap + 1):
        for combo in itertools.combinations(zs, r):
            yield combo


def _split(candidates):
    if isinstance(candidates, tuple) and len(candidates) == 2 and all(
            isinstance(c, (CandidateClass, list, tuple)) for c in candidates) and \
            not all(isinstance(c, MachineProgram) for c in candidates):
        return candidates
    return candidates, candidates


def _clause2(g_f, lam, g_fp, M_profile):
    d1 = action_distribution(g_f, lam)
    d2 = action_distribution(g_fp, M_profile)
    worst = (Fraction(0), None)
    for types in d1:
        tv = total_variation(d1[types], d2[types])
        if tv > worst[0]:
            worst = (tv, types)
    return worst


def check_universal_implementation(M_profile: StrategyProfile, F_prime: MediatorSpec, F: MediatorSpec,
                                   game_family: Sequence[GameSpec], coalitions, p: SpeedupSpec, epsilon,
                                   candidates, *, subset_cap: Optional[int] = None) -> EquilibriumReport:
    """For every game and every ``Z' ⊆ coalitions`` (up to ``subset_cap``
    members): if the canonical protocol is a p-robust ``Z'``-safe Nash
    equilibrium with ``F``, then ``M_profile`` is a ``Z'``-safe
    epsilon-equilibrium with ``F_prime`` and induces the same action law
    for every type profile."""
    epsilon = Fraction(epsilon)
    cand_f, cand_fp = _split(candidates)
    children = []
    holds = True
    table = []
    for g in game_family:
        if F.kind == "functionality" and g.input_length != F.input_length:
            raise SchemaError(f"game {g.name!r} has input length {g.input_length}, mediator expects "
                              f"{F.input_length}")
        g_f, g_fp = g.with_mediator(F), g.with_mediator(F_prime)
        lam = _lambda_profile(F, g.players)
        tv, at = _clause2(g_f, lam, g_fp, M_profile)
        for zs in _subsets(coalitions, subset_cap):
            ante = check_p_robust(g_f, lam, p, 0, cand_f, coalitions=zs)
            row = {"game": g.name, "Z'": [_subject_name(z) for z in zs], "antecedent": ante.holds}
            if not ante.holds:
                row.update(status="vacuous")
                table.append(row)
                continue
            c1 = check_coalition_safe(g_fp, M_profile, zs, epsilon, cand_fp)
            c1.details["game"] = g.name
            children.append(c1)
            row.update(preserving_equilibrium=c1.holds, preserving_distribution=(tv == 0))
            if tv != 0:
                row["tv_witness"] = {"types": list(at), "total_variation": tv}
            ok = c1.holds and tv == 0
            row["status"] = "holds" if ok else "fails"
            holds = holds and ok
            table.append(row)
    rep = EquilibriumReport("universal_implementation", holds, epsilon, _class_label(cand_fp),
                            children=children)
    rep.clauses = {
        "preserving_equilibrium": all(r.get("preserving_equilibrium", True) for r in table),
        "preserving_distribution": all(r.get("preserving_distribution", True) for r in table),
    }
    rep.details["rows"] = table
    rep.details["subset_cap"] = subset_cap if subset_cap is not None else len(list(coalitions))
    return rep


def check_strong_universal_implementation(M_profile: StrategyProfile, F_prime: MediatorSpec,
                                          F: MediatorSpec, game_family: Sequence[GameSpec], coalitions,
                                          p: SpeedupSpec, epsilon, candidates, *,
                                          subset_cap: Optional[int] = None) -> EquilibriumReport:
    """Universal implementation plus: whenever abstaining (⊥) is a p-robust
    best response against the canonical protocol with ``F``, it stays an
    epsilon-best response against ``M_profile`` with ``F_prime``."""
    epsilon = Fraction(epsilon)
    base = check_universal_implementation(M_profile, F_prime, F, game_family, coalitions, p, epsilon,
                                          candidates, subset_cap=subset_cap)
    cand_f, cand_fp = _split(candidates)
    rows = []
    ok = True
    for g in game_family:
        g_f, g_fp = g.with_mediator(F), g.with_mediator(F_prime)
        lam = _lambda_profile(F, g.players)
        for z in coalitions:
            z = coalition(z)
            subj = next(iter(z)) if len(z) == 1 else z
            ante = best_response_gap(g_f, _deviate(lam, subj, BOT), subj, cand_f,
                                     transform=p.transform(g.input_length), incumbent=BOT)
            row = {"game": g.name, "Z": _subject_name(z), "antecedent": ante.holds,
                   "antecedent_gap": ante.max_gap, "antecedent_witness": ante.witness}
            if ante.holds:
                cons = best_response_gap(g_fp, _deviate(M_profile, subj, BOT), subj, cand_fp,
                                         epsilon=epsilon, incumbent=BOT)
                row.update(consequent=cons.holds, consequent_gap=cons.max_gap,
                           consequent_witness=cons.witness)
                ok = ok and cons.holds
            else:
                row["consequent"] = "vacuous"
            rows.append(row)
    rep = EquilibriumReport("strong_universal_implementation", base.holds and ok, epsilon,
                            base.class_label, children=[base])
    rep.clauses = dict(base.clauses, preserving_abstention=ok)
    rep.details["abstention_rows"] = rows
    return rep


__all__ = [
    "CandidateClass",
    "EquilibriumReport",
    "IDENTITY",
    "SpeedupSpec",
    "SubjectReport",
    "best_response_gap",
    "check_M_acceptable",
    "check_coalition_safe",
    "check_epsilon_nash",
    "check_p_robust",
    "check_strong_universal_implementation",
    "check_universal_implementation",
]
