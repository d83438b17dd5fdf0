"""Executable case studies.

Each builder returns a :class:`CaseStudy`: the game, the profile under
test, the candidate class and a list of expected verdicts.  An expectation
pairs a provenance tag with an independent oracle; :func:`run_case` runs
the engine, recomputes the oracle and compares.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .complexity import ComplexityFnSpec
from .equilibrium import (
    IDENTITY,
    CandidateClass,
    best_response_gap,
    check_epsilon_nash,
    check_M_acceptable,
    check_universal_implementation,
)
from .errors import UnknownCase
from .expr import format_rational
from .game import GameSpec, action_distribution, expected_utility, leaves
from .machines import (
    all_automata,
    constant,
    cooperate_then_defect_last,
    counting_deviant,
    counting_deviants,
    fermat_tester,
    full_sender,
    prefix_sender,
    roshambo_class,
    tit_for_tat,
    trial_division,
)
from .mediation import comparator_mediator, functionality_mediator, lambda_machine, repeated_game_harness
from .profile import StrategyProfile
from .solver import induce_finite_game, solve_support_enumeration
from .tapes import enumerate_tapes
from .vm import BOT, run_machine

PUBLISHED, DERIVED, TRIVIAL = "PUBLISHED", "DERIVED", "TRIVIAL"


@dataclass(frozen=True)
class Expectation:
    """``run(case)`` returns ``(observed, expected, report)``; the check
    passes when they are equal."""

    name: str
    provenance: str
    description: str
    run: Callable = field(compare=False, repr=False)


@dataclass(frozen=True)
class CaseStudy:
    name: str
    params: tuple
    game: GameSpec
    profile: StrategyProfile
    candidates: CandidateClass
    expectations: tuple = field(default=(), compare=False)
    notes: tuple = ()

    @property
    def mediator(self):
        return self.game.mediator

    def param(self, key):
        return dict(self.params)[key]


@dataclass
class CheckResult:
    name: str
    provenance: str
    description: str
    expected: object
    observed: object
    passed: bool
    report: object = None

    def as_dict(self) -> dict:
        return {
            "check": self.name,
            "provenance": self.provenance,
            "description": self.description,
            "expected": _plain(self.expected),
            "observed": _plain(self.observed),
            "passed": self.passed,
            "report": self.report.as_dict() if hasattr(self.report, "as_dict") else _plain(self.report),
        }


@dataclass
class CaseBundle:
    case: CaseStudy
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def holds(self) -> bool:
        return self.passed

    def result(self, name: str) -> CheckResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "case": self.case.name,
            "params": {k: _plain(v) for k, v in self.case.params},
            "candidate_class": self.case.candidates.label,
            "passed": self.passed,
            "notes": list(self.case.notes),
            "checks": [r.as_dict() for r in self.results],
        }


def _plain(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _params(**kw) -> tuple:
    return tuple(sorted(kw.items()))


# ---------------------------------------------------------------------------
# roshambo

def _roshambo_payoff(i: int, j: int) -> str:
    ai, aj = f"num(a{i})", f"num(a{j})"
    return (f"(-1 if not (0 <= {ai} <= 2) else (1 if not (0 <= {aj} <= 2) else "
            f"(1 if {ai} == ({aj} + 1) % 3 else (-1 if {aj} == ({ai} + 1) % 3 else 0))))")


def roshambo_game(cost_det=1, cost_rand=2, costs: bool = True, free_randomization: bool = False) -> GameSpec:
    """Two-player roshambo between machines.  Actions are ``0``/``1``/``2``
    (rock, paper, scissors); ``i`` wins when ``a_i = a_j + 1 mod 3``.  An
    invalid action loses to any valid one.  Deterministic play costs
    ``cost_det``, randomized play ``cost_rand``, ``⊥`` nothing."""
    utils = []
    for i, j in ((1, 2), (2, 1)):
        u = _roshambo_payoff(i, j)
        if costs:
            u += f" - (0 if c{i} == 0 else (cost_det if c{i} == 1 else cost_rand))"
        utils.append(u)
    spec = ComplexityFnSpec.make("rand_charge", free_randomization=True) if free_randomization \
        else ComplexityFnSpec.make("rand_charge")
    lo = -1 - max(Fraction(cost_det), Fraction(cost_rand)) if costs else -1
    return GameSpec.build(
        name="roshambo" + ("" if costs else "-free") + ("-freerand" if free_randomization else ""),
        players=2, input_length=1, types={("", ""): 1}, utilities=utils,
        machines=roshambo_class(), complexity={"default": spec},
        params={"cost_det": Fraction(cost_det), "cost_rand": Fraction(cost_rand)} if costs else {},
        utility_range=(lo, 1), monotone=costs,
    )


def _sweep(game, programs, candidates):
    rows = []
    for combo in itertools.product(programs, repeat=game.players):
        rep = check_epsilon_nash(game, StrategyProfile(combo), 0, candidates)
        rows.append(((tuple(p.label for p in combo)), rep))
    return rows


def build_roshambo(cost_det=1, cost_rand=2) -> CaseStudy:
    cost_det, cost_rand = Fraction(cost_det), Fraction(cost_rand)
    game = roshambo_game(cost_det, cost_rand)
    cls = CandidateClass.uniform("roshambo{R,P,S,U}", roshambo_class(), 2)
    R, P, S, U = roshambo_class()

    def sweep(case):
        rows = _sweep(case.game, roshambo_class(), case.candidates)
        holding = [labels for labels, rep in rows if rep.holds]
        witnesses_ok = all(rep.holds or rep.witness[2] > 0 for _, rep in rows)
        # oracle: against a pure opponent the pure best reply earns 1 - cost_det;
        # against U every valid action earns 0, so the cheapest valid action wins;
        # ⊥ earns -1.  A profile is stable iff each side is a best reply.
        expected = _roshambo_oracle(cost_det, cost_rand)
        table = {"/".join(k): {"holds": rep.holds, "witness": rep.witness and
                               [rep.witness[1], rep.witness[2]]} for k, rep in rows}
        return ({"holding": holding, "witnesses_exact": witnesses_ok},
                {"holding": expected, "witnesses_exact": True}, table)

    def free(case):
        g = roshambo_game(costs=False)
        fg = induce_finite_game(g, [R, P, S])
        eq = solve_support_enumeration(fg)
        obs = [eq.distribution(i) for i in (1, 2)]
        third = Fraction(1, 3)
        return obs, [{"R": third, "P": third, "S": third}] * 2, eq.as_dict()

    exps = [
        Expectation("nash_sweep", PUBLISHED if cost_rand > cost_det else DERIVED,
                    "epsilon=0 Nash over all 16 profiles of {R,P,S,U}", sweep),
        Expectation("free_computation_uniform", PUBLISHED,
                    "with costs stripped the solver returns the uniform equilibrium", free),
    ]
    return CaseStudy("roshambo", _params(cost_det=cost_det, cost_rand=cost_rand), game,
                     StrategyProfile((R, R)), cls, tuple(exps))


def _roshambo_oracle(cost_det, cost_rand):
    labels = ["R", "P", "S", "U"]
    cost = {"R": cost_det, "P": cost_det, "S": cost_det, "U": cost_rand, "bot": Fraction(0)}

    def payoff(x, y):
        # expected stage payoff of x against y, both valid unless "bot"
        if x == "bot":
            return Fraction(-1)
        if y == "bot":
            return Fraction(1)
        if x == "U" or y == "U":
            return Fraction(0)
        ix, iy = "RPS".index(x), "RPS".index(y)
        return Fraction(1 if ix == (iy + 1) % 3 else -1 if iy == (ix + 1) % 3 else 0)

    def value(x, y):
        return payoff(x, y) - cost[x]

    out = []
    for a, b in itertools.product(labels, repeat=2):
        ok = all(value(a, b) >= value(d, b) for d in labels + ["bot"]) and \
            all(value(b, a) >= value(d, a) for d in labels + ["bot"])
        if ok:
            out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# primality

def primality_types(n: int) -> list:
    """``n``-bit binary strings of the odd numbers strictly between
    ``2^(n-1)`` and ``2^n``."""
    return [format(v, "b") for v in range(2 ** (n - 1) + 1, 2 ** n, 2)]


def _is_prime(v: int) -> bool:
    return v > 1 and all(v % d for d in range(2, int(v ** 0.5) + 1))


def primality_game(n=4, safe_reward=1, correct_reward=2, wrong_penalty=1000, time_threshold=2,
                   time_penalty=2, machines=()) -> GameSpec:
    types = primality_types(n)
    u = ("(safe if a1 == '2' else (correct if a1 == ('1' if isprime(bits(t1)) else '0') else -wrong))"
         " - (penalty if c1 >= 2 else 0)")
    return GameSpec.build(
        name="primality", players=1, input_length=n,
        types={(t,): Fraction(1, len(types)) for t in types}, utilities=[u],
        machines=machines,
        complexity={"default": ComplexityFnSpec.make("coarse_threshold", threshold=time_threshold)},
        params={"safe": Fraction(safe_reward), "correct": Fraction(correct_reward),
                "wrong": Fraction(wrong_penalty), "penalty": Fraction(time_penalty)},
        utility_range=(min(safe_reward, correct_reward, -wrong_penalty) - max(time_penalty, 0),
                       max(safe_reward, correct_reward) - min(time_penalty, 0)),
        monotone=True,
    )


def _step_profile(prog, types, budget, cap=8):
    """Steps of ``prog`` per type, over every resolved tape."""
    out = {}
    for t in types:
        steps = []
        for _, _, res in enumerate_tapes(lambda tape: run_machine(prog, t, tape, budget=budget), cap):
            if res is not None:
                steps.append(res.meter.steps)
        out[t] = steps
    return out


def build_primality(n=4, safe_reward=1, correct_reward=2, wrong_penalty=1000, time_threshold=2,
                    time_penalty=2, randomized: bool = False) -> CaseStudy:
    """The ``randomized`` variant adds a Fermat tester and sets the time
    threshold to its largest measured step count, which lies below the
    deterministic tester's worst case."""
    c0, c1, c2 = constant("0"), constant("1"), constant("2")
    tester = trial_division()
    progs = [c0, c1, c2, tester]
    notes = []
    types = primality_types(n)
    base = primality_game(n).budget
    if randomized:
        ferm = fermat_tester()
        progs.append(ferm)
        fsteps = _step_profile(ferm, types, base)
        dsteps = _step_profile(tester, types, base)
        time_threshold = max(max(v) for v in fsteps.values())
        notes.append(f"threshold {time_threshold} = largest Fermat step count; "
                     f"deterministic steps {dict((t, v[0]) for t, v in dsteps.items())}")
    game = primality_game(n, safe_reward, correct_reward, wrong_penalty, time_threshold, time_penalty,
                          machines=progs)
    cls = CandidateClass.uniform("primality{const0,const1,const2,tester" + (",fermat}" if randomized else "}"),
                                 progs, 1)
    incumbent = progs[-1] if randomized else c2
    safe, correct, wrong, penalty = map(Fraction, (safe_reward, correct_reward, wrong_penalty, time_penalty))

    def oracle_value(prog, ts):
        """Payoffs in plain Python from each run's output and step count,
        the right answer from trial division, conditioned on resolved tapes."""
        total = Fraction(0)
        for t in ts:
            want = "1" if _is_prime(int(t, 2)) else "0"
            acc, mass = Fraction(0), Fraction(0)
            for _, w, res in enumerate_tapes(lambda tape: run_machine(prog, t, tape, budget=base), 8):
                if res is None:
                    continue
                out = res.output
                u = safe if out == "2" else (correct if out == want else -wrong)
                if not prog.is_bot and res.meter.steps > time_threshold:
                    u -= penalty
                acc += w * u
                mass += w
            total += acc / mass
        return total / len(ts)

    def best_response(case):
        rep = check_epsilon_nash(case.game, StrategyProfile((incumbent,)), 0, case.candidates)
        s = rep.subjects[0]
        obs = {e.label: e.gap for e in s.entries if e.label != incumbent.label}
        u_inc = oracle_value(incumbent, types)
        exp = {p.label: oracle_value(p, types) - u_inc for p in [BOT] + progs if p.label != incumbent.label}
        return ({"holds": rep.holds, "gaps": obs},
                {"holds": all(g <= 0 for g in exp.values()), "gaps": exp}, rep)

    def conditional(case):
        prime = next((t for t in types if _is_prime(int(t, 2))), None)
        g = case.game.with_types({(prime,): 1})
        u1 = expected_utility(g, StrategyProfile((c1,)), 1).value
        u_safe = expected_utility(g, StrategyProfile((c2,)), 1).value
        return ({"type": prime, "const1_beats_safe": u1 > u_safe, "const1": u1, "safe": u_safe},
                {"type": prime, "const1_beats_safe": correct > safe, "const1": correct, "safe": safe}, None)

    exps = [Expectation("best_response", DERIVED,
                        "gap table against the incumbent from a direct oracle", best_response)]
    if not randomized:
        exps.append(Expectation("conditional_best_response", PUBLISHED,
                                "at a fixed prime type the constant prime guess beats playing safe",
                                conditional))
    else:
        def strict(case):
            rep = best_response_gap(case.game, StrategyProfile((incumbent,)), 1, case.candidates)
            return rep.gap_of(tester.label) < 0, True, rep
        exps.append(Expectation("randomized_strictly_better", DERIVED,
                                "the randomized tester strictly beats the deterministic one", strict))
    params = _params(n=n, safe_reward=safe, correct_reward=correct, wrong_penalty=wrong,
                     time_threshold=time_threshold, time_penalty=penalty, randomized=randomized)
    return CaseStudy("primality", params, game, StrategyProfile((incumbent,)), cls, tuple(exps), tuple(notes))


# ---------------------------------------------------------------------------
# finitely repeated prisoner's dilemma

def frpd_class(rounds: int, state_cap: int = 2) -> CandidateClass:
    progs = all_automata(state_cap) + counting_deviants(rounds)
    return CandidateClass.uniform(f"automata<= {state_cap} states + counting deviants (N={rounds})", progs, 2)


def build_frpd(N=10, delta=Fraction(9, 10), alpha=Fraction(7, 10), automaton_state_cap=2,
               asymmetric: bool = False) -> CaseStudy:
    """Tit-for-tat against tit-for-tat; memory (carried state) costs
    ``alpha``.  The ``asymmetric`` variant makes memory free for player 2,
    who then plays cooperate-then-defect-last."""
    delta, alpha = Fraction(delta), Fraction(alpha)
    tft = tit_for_tat()
    comp = {"default": ComplexityFnSpec.make("state_charge", weight=2)}
    if asymmetric:
        comp[2] = ComplexityFnSpec.make("state_charge", weight=0)
    game, _ = repeated_game_harness(rounds=N, delta=delta, alpha=alpha, complexity=comp,
                                    name="frpd" + ("-asym" if asymmetric else ""))
    cls = frpd_class(N, automaton_state_cap)
    second = cooperate_then_defect_last(N) if asymmetric else tft
    profile = StrategyProfile((tft, second))
    notes = ["class: deterministic per-round automata plus round-counting deviants; "
             "randomized strategies are outside the class"]
    last = counting_deviant(N, N, "k_and_last")

    if not asymmetric:
        def nash(case):
            rep = check_epsilon_nash(case.game, case.profile, 0, case.candidates)
            return rep.holds, alpha >= 2 * delta ** N, rep

        def last_round(case):
            s = best_response_gap(case.game, case.profile, 1, [last])
            gap = s.entries[0].utility - expected_utility(case.game, case.profile, 1).value
            return gap, 2 * delta ** N - alpha, s

        def max_gap(case):
            s = best_response_gap(case.game, case.profile, 1, case.candidates)
            return s.max_gap, max(Fraction(0), 2 * delta ** N - alpha), s

        exps = [
            Expectation("tft_nash", PUBLISHED, "(TfT,TfT) is Nash iff alpha >= 2 delta^N", nash),
            Expectation("defect_last_gap", DERIVED, "defecting only in the last round gains 2 delta^N - alpha",
                        last_round),
            Expectation("max_gap", DERIVED, "the largest gap over the class is max(0, 2 delta^N - alpha)",
                        max_gap),
            Expectation("deviation_loss", PUBLISHED,
                        "a deviant defecting first at k < N loses at least 6 delta^(k+1) - 2 delta^k",
                        lambda case: _loss_check(case, N, delta)),
        ]
    else:
        threshold = 2 * delta ** (N - 1) + 2 * delta ** N

        def nash(case):
            rep = check_epsilon_nash(case.game, case.profile, 0, case.candidates)
            return rep.holds, alpha >= threshold, rep

        exps = [Expectation("asymmetric_nash", DERIVED,
                            "(TfT, cooperate-then-defect-last) is Nash iff alpha >= 2 delta^(N-1) + 2 delta^N",
                            nash)]
        notes.append(f"player 1's best memoryful reply defects in rounds N-1 and N, gaining "
                     f"{format_rational(threshold)} before the memory charge")
    params = _params(N=N, delta=delta, alpha=alpha, automaton_state_cap=automaton_state_cap,
                     asymmetric=asymmetric)
    return CaseStudy("frpd", params, game, profile, cls, tuple(exps), tuple(notes))


def _loss_check(case, N, delta):
    """Payoff-only loss of every class member that, against TfT, defects
    first in a round ``k < N``."""
    g0, _ = repeated_game_harness(rounds=N, delta=delta, alpha=0)
    tft = tit_for_tat()
    base = expected_utility(g0, StrategyProfile((tft, tft)), 1).value
    violations = []
    checked = 0
    for prog in case.candidates.members(1, tft, case.profile):
        prof = StrategyProfile((prog, tft))
        lv, _ = leaves(g0, prof, g0.types[0][0])
        moves = lv[0][1].actions[0]
        k = moves.find("1") + 1
        if not 0 < k < N:
            continue
        checked += 1
        loss = base - expected_utility(g0, prof, 1).value
        bound = 6 * delta ** (k + 1) - 2 * delta ** k
        if loss < bound:
            violations.append({"label": prog.label, "k": k, "loss": loss, "bound": bound})
    return {"violations": violations, "checked_positive": checked > 0}, \
        {"violations": [], "checked_positive": True}, {"checked": checked}


# ---------------------------------------------------------------------------
# revelation counterexample

def revelation_types(n: int, k: int, sample: Optional[int] = None, seed: int = 0,
                     equal_only: bool = False) -> list:
    """Pairs of ``n``-bit types that are equal or agree in at most ``k``
    positions.  ``sample`` draws that many distinct pairs with a seeded
    generator."""
    words = ["".join(b) for b in itertools.product("01", repeat=n)]
    pairs = []
    for x in words:
        for y in words:
            agree = sum(a == b for a, b in zip(x, y))
            if x == y or (not equal_only and agree <= k):
                pairs.append((x, y))
    if sample is not None and sample < len(pairs):
        pairs = sorted(random.Random(seed).sample(pairs, sample))
    return pairs


def revelation_game(n=5, k=1, sample=None, seed=0, equal_only=False, machines=()) -> GameSpec:
    pairs = revelation_types(n, k, sample, seed, equal_only)
    utils = [f"1 if a{i} == ('1' if t1 == t2 else '0') and c{i} - 1 < k + 2 else 0" for i in (1, 2)]
    return GameSpec.build(
        name="revelation", players=2, input_length=n,
        types={p: Fraction(1, len(pairs)) for p in pairs}, utilities=utils, machines=machines,
        complexity={"default": ComplexityFnSpec.make("weighted_sum", offset=1, weights={"sent_bits": 1})},
        params={"k": k}, mediator=comparator_mediator(1), normalized=True, monotone=True,
    )


def revelation_candidates(n: int, k: int) -> list:
    progs = [prefix_sender(j) for j in range(1, k + 2)]
    progs += [full_sender(), constant("0"), constant("1"), prefix_sender(k + 1, invert=True)]
    return progs


def build_revelation(n=5, k=1, sample: Optional[int] = None, seed: int = 0,
                     equal_only: bool = False) -> CaseStudy:
    progs = revelation_candidates(n, k)
    game = revelation_game(n, k, sample, seed, equal_only, machines=progs)
    cls = CandidateClass.uniform(f"revelation senders (n={n}, k={k})", progs, 2)
    pre = prefix_sender(k + 1)
    full = full_sender()
    profile = StrategyProfile((pre, pre))
    pairs = [t[:2] for t, _ in game.types]

    def comparator(case):
        dist = action_distribution(case.game, case.profile)
        wrong = []
        for t, d in dist.items():
            want = "1" if t[0] == t[1] else "0"
            if d != {(want, want): Fraction(1)}:
                wrong.append(list(t[:2]))
        return {"wrong": wrong, "pairs": len(dist)}, {"wrong": [], "pairs": len(pairs)}, None

    def nash(case):
        rep = check_epsilon_nash(case.game, case.profile, 0, case.candidates)
        return rep.holds, True, rep

    def full_report(case):
        prof = StrategyProfile((full, full))
        us = [expected_utility(case.game, prof, i).value for i in (1, 2)]
        s = best_response_gap(case.game, prof, 1, case.candidates)
        return ({"utilities": us, "gap_positive": s.max_gap > 0},
                {"utilities": [Fraction(0), Fraction(0)], "gap_positive": True}, s)

    exps = [
        Expectation("comparator_correct", DERIVED,
                    "the comparator answers 'same' exactly on equal pairs", comparator),
        Expectation("prefix_nash", DERIVED, "sending k+1 bits to the comparator is a 0-Nash equilibrium", nash),
        Expectation("full_report_zero", PUBLISHED, "reporting the full type costs too much and earns 0",
                    full_report),
    ]
    if equal_only:
        def silent(case):
            prof = StrategyProfile((constant("1"), constant("1")))
            return expected_utility(case.game, prof, 1).value, Fraction(1), None
        exps.append(Expectation("silent_same_guess", TRIVIAL,
                                "on equal types a silent 'same' guess also earns 1", silent))
    params = _params(n=n, k=k, sample=sample, seed=seed, equal_only=equal_only)
    return CaseStudy("revelation", params, game, profile, cls, tuple(exps))


# ---------------------------------------------------------------------------
# implementation by protocols

def canonical_types(players: int = 2, n: int = 1, z: str = "0") -> dict:
    """Uniform ``x;z`` types over every ``n``-bit ``x`` with a fixed ``z``."""
    words = ["".join(b) for b in itertools.product("01", repeat=n)]
    combos = list(itertools.product(words, repeat=players))
    return {tuple(f"{x};{z}" for x in xs): Fraction(1, len(combos)) for xs in combos}


def universal_family(n: int = 1, complexity: Optional[ComplexityFnSpec] = None) -> list:
    """Three canonical two-player games with ``n``-bit inputs: match the
    XOR of the inputs, coordinate, and guess the other player's input.
    Utilities ignore complexity."""
    complexity = complexity or ComplexityFnSpec.make(
        "constant_for_protocol", c0=1, labels=frozenset({"lambda[1]"}))
    x1, x2 = f"t1[:{n}]", f"t2[:{n}]"
    specs = {
        "xor-match": [f"1 if a1 == xorbits({x1}, {x2}) else 0", f"1 if a2 == xorbits({x1}, {x2}) else 0"],
        "coordinate": ["1 if a1 == a2 else 0", "1 if a2 == a1 else 0"],
        "guess-other": [f"1 if a1 == {x2} else 0", f"1 if a2 == {x1} else 0"],
    }
    return [GameSpec.build(name=name, players=2, input_length=n, types=canonical_types(2, n),
                           utilities=u, complexity={"default": complexity}, normalized=True,
                           monotone=True)
            for name, u in specs.items()]


def protocol_candidates(identity: int = 1, n: int = 1) -> CandidateClass:
    progs = [lambda_machine(identity), lambda_machine(identity, flip_first=True)]
    progs += [constant("0" * n), constant("1" * n)]
    return CandidateClass.uniform("protocol{lambda,lambda~flip,const}", progs, 2)


def build_universal(n: int = 1) -> CaseStudy:
    """The canonical protocol with an XOR mediator implements itself; a
    protocol that flips one output bit does not; a slower protocol is not
    acceptable under a steps charge."""
    F = functionality_mediator("xor", n, identity=1)
    family = universal_family(n)
    lam = lambda_machine(1)
    flip = lambda_machine(1, flip_first=True)
    cls = protocol_candidates(1, n)
    zs = [(1,), (2,)]
    identity_profile = StrategyProfile((lam, lam))
    flipped = StrategyProfile((flip, lam))

    def identity(case):
        rep = check_universal_implementation(identity_profile, F, F, family, zs, IDENTITY, 0, cls)
        return rep.holds, True, rep

    def corrupted(case):
        rep = check_universal_implementation(flipped, F, F, family, zs, IDENTITY, 0, cls)
        tvs = [r["tv_witness"]["total_variation"] for r in rep.details["rows"] if "tv_witness" in r]
        obs = {"preserving_distribution": rep.clauses["preserving_distribution"],
               "max_tv": max(tvs, default=Fraction(0))}
        return obs, {"preserving_distribution": False, "max_tv": Fraction(1)}, rep

    def acceptable(case):
        g = family[0].with_complexity({"default": ComplexityFnSpec("steps")})
        same = check_M_acceptable(g, identity_profile, F)
        slower = check_M_acceptable(g, flipped, F)
        return ({"lambda": same.holds, "flipped": slower.holds},
                {"lambda": True, "flipped": False}, {"lambda": same, "flipped": slower})

    exps = [
        Expectation("identity_implementation", TRIVIAL,
                    "(lambda, F) universally implements F on the family", identity),
        Expectation("corrupted_distribution", DERIVED,
                    "flipping one output bit breaks distribution preservation with TV 1", corrupted),
        Expectation("M_acceptability", DERIVED,
                    "under a steps charge only protocols as fast as lambda are acceptable", acceptable),
    ]
    game = family[0].with_mediator(F)
    return CaseStudy("universal", _params(n=n), game, identity_profile, cls, tuple(exps),
                     ("family: " + ", ".join(g.name for g in family),))


def strong_universal_setup():
    """A game where player 2 earns 2 for naming player 1's input bit and
    pays 1 for running any machine.  With the ``zero`` mediator abstaining
    is a best response; a mediator that leaks player 1's input makes
    participation profitable."""
    F = functionality_mediator("zero", 1, identity=1)
    F_prime = functionality_mediator("leak_first", 1, identity=1)
    game = GameSpec.build(
        name="leak", players=2, input_length=1, types=canonical_types(2, 1),
        utilities=["0", "(2 if a2 == t1[:1] else 0) - (1 if c2 >= 1 else 0)"],
        complexity={"default": ComplexityFnSpec.make("rand_charge")}, monotone=True,
    )
    return F, F_prime, [game], protocol_candidates(1, 1)


# ---------------------------------------------------------------------------

BUILDERS = {
    "roshambo": build_roshambo,
    "primality": build_primality,
    "frpd": build_frpd,
    "revelation": build_revelation,
    "universal": build_universal,
}


def build_case(name: str, **params) -> CaseStudy:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise UnknownCase(f"unknown case {name!r}; known: {sorted(BUILDERS)}") from None
    return builder(**params)


def run_case(name: str, **params) -> CaseBundle:
    """Build the case, run every expectation and compare."""
    case = build_case(name, **params)
    results = []
    for exp in case.expectations:
        observed, expected, report = exp.run(case)
        results.append(CheckResult(exp.name, exp.provenance, exp.description, expected, observed,
                                   observed == expected, report))
    return CaseBundle(case, results)


__all__ = [
    "BUILDERS",
    "CaseBundle",
    "CaseStudy",
    "CheckResult",
    "Expectation",
    "build_case",
    "build_frpd",
    "build_primality",
    "build_revelation",
    "build_roshambo",
    "build_universal",
    "canonical_types",
    "protocol_candidates",
    "strong_universal_setup",
    "universal_family",
    "frpd_class",
    "primality_game",
    "primality_types",
    "revelation_game",
    "revelation_types",
    "roshambo_game",
    "run_case",
]
