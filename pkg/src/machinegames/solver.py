"""Equilibria of finite Bayesian games induced by machine games.

Two regimes have guaranteed equilibria: computationally cheap games, where
utilities ignore complexity, and free-randomization games, where a machine
that samples a base machine is charged only the base machine's complexity.
In both a finite base class of deterministic machines induces an ordinary
finite Bayesian game.  We solve that game exactly by support enumeration
(two players) or approximately by regret matching, and turn a mixed
strategy back into a single sampler machine.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .complexity import evaluate_complexity
from .errors import (
    BudgetExceeded,
    InvalidSpec,
    IterationCapExceeded,
    NoEquilibriumInSupports,
    NotComputationallyCheap,
    ProbabilityNotOne,
    SchemaError,
    SizeLimit,
)
from .expr import format_rational
from .game import GameSpec
from .vm import Instruction, MachineProgram, relocate, run_machine

MAX_SAMPLER_LEAVES = 4096


@dataclass(frozen=True)
class FiniteBayesianGame:
    """Types per player, a prior over full type profiles (one slot per
    player plus nature's), action labels per player and a payoff vector
    for every (type profile, action-index profile)."""

    players: int
    types: tuple
    prior: tuple
    actions: tuple
    payoffs: dict
    base: tuple = ()

    def __post_init__(self):
        if len(self.types) != self.players or len(self.actions) != self.players:
            raise SchemaError("need one type set and one action set per player")
        total = sum((p for _, p in self.prior), Fraction(0))
        if total != 1:
            raise ProbabilityNotOne(f"prior sums to {total}, not 1")
        for t, p in self.prior:
            if p < 0:
                raise SchemaError(f"negative prior at {t!r}")
            for i in range(self.players):
                if t[i] not in self.types[i]:
                    raise SchemaError(f"type {t[i]!r} of player {i + 1} is undeclared")
            for a in itertools.product(*(range(len(A)) for A in self.actions)):
                u = self.payoffs.get((t, a))
                if u is None or len(u) != self.players:
                    raise SchemaError(f"payoff table missing ({t!r}, {a!r})")

    @classmethod
    def normal_form(cls, tables: Sequence, actions: Optional[Sequence] = None) -> "FiniteBayesianGame":
        """Complete-information game; ``tables[i]`` is player ``i``'s payoff
        array indexed by action profile (nested lists)."""
        arrs = [np.asarray(tab, dtype=object) for tab in tables]
        m = len(arrs)
        shape = arrs[0].shape
        if actions is None:
            actions = [tuple(str(k) for k in range(n)) for n in shape]
        t = tuple("" for _ in range(m + 1))
        payoffs = {}
        for a in itertools.product(*(range(n) for n in shape)):
            payoffs[(t, a)] = tuple(Fraction(arr[a]) for arr in arrs)
        return cls(m, tuple(("",) for _ in range(m)), ((t, Fraction(1)),),
                   tuple(tuple(A) for A in actions), payoffs)

    def marginal(self, i: int, ti: str) -> Fraction:
        return sum((p for t, p in self.prior if t[i] == ti), Fraction(0))

    def cells(self):
        """``(player, type)`` pairs with positive marginal, in order."""
        out = []
        for i in range(self.players):
            for ti in self.types[i]:
                if self.marginal(i, ti) > 0:
                    out.append((i, ti))
        return out


@dataclass(frozen=True)
class MixedEquilibrium:
    """``strategies[i][t]`` is a tuple of probabilities over
    ``actions[i]``; ``residual`` bounds any player's ex-ante regret."""

    actions: tuple
    strategies: tuple
    residual: Fraction = Fraction(0)
    method: str = "support_enumeration"

    def distribution(self, i: int, t: str = "") -> dict:
        """Player ``i`` (1-based) at type ``t`` as ``{action: prob}``."""
        return dict(zip(self.actions[i - 1], dict(self.strategies[i - 1])[t]))

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "residual": format_rational(self.residual),
            "players": [
                {t: {a: format_rational(p) for a, p in zip(self.actions[i], probs)}
                 for t, probs in self.strategies[i]}
                for i in range(len(self.actions))
            ],
        }


# ---------------------------------------------------------------------------
# inducing the finite game

def _free_randomization(game: GameSpec) -> bool:
    specs = [s for _, s in game.complexity]
    return bool(specs) and all(s.get("free_randomization", False) for s in specs)


def induce_finite_game(game: GameSpec, machine_base) -> FiniteBayesianGame:
    """The finite game whose actions are the distinct behaviours of the
    deterministic base machines.

    ``machine_base`` is a list of programs shared by all players or a list
    of such lists, one per player.  Behaviours are compared on every type
    the player can have (output and, in a free-randomization game, the
    charged complexity); the first machine of each behaviour class names
    the action.
    """
    if game.mediator is not None:
        raise SchemaError("the finite game is induced only for unmediated games")
    cheap = game.is_cheap
    if not cheap and not _free_randomization(game):
        raise NotComputationallyCheap(
            f"{game.name!r}: utilities read complexities and randomization is not free")
    m = game.players
    if machine_base and isinstance(machine_base[0], MachineProgram):
        machine_base = [list(machine_base)] * m
    if len(machine_base) != m:
        raise SchemaError("need one machine base per player")
    budget = game.budget
    types = []
    actions = []
    base = []
    behaviour = []
    for i in range(m):
        tis = sorted({t[i] for t, _ in game.types})
        spec = game.complexity_for(i + 1)
        seen = {}
        for prog in machine_base[i]:
            row = []
            for ti in tis:
                nature = next(t[m] for t, _ in game.types if t[i] == ti)
                try:
                    out, view, meter = run_machine(prog, ti, "", budget=budget)
                except BudgetExceeded as exc:
                    raise InvalidSpec(f"base machine {prog.label!r} is not deterministic and bounded: {exc}")
                c = 0 if cheap else evaluate_complexity(spec, prog, view, meter, nature)
                row.append((out, c))
            seen.setdefault(tuple(row), prog)
        progs = list(seen.values())
        types.append(tuple(tis))
        actions.append(tuple(p.label for p in progs))
        base.append(tuple(progs))
        behaviour.append({ti: [dict(zip(tis, key))[ti] for key in seen] for ti in tis})
    payoffs = {}
    for t, _ in game.types:
        for a in itertools.product(*(range(len(A)) for A in actions)):
            outs = tuple(behaviour[i][t[i]][a[i]][0] for i in range(m))
            cs = tuple(behaviour[i][t[i]][a[i]][1] for i in range(m))
            payoffs[(t, a)] = tuple(game.utility(i + 1, t, outs, cs) for i in range(m))
    return FiniteBayesianGame(m, tuple(types), game.types, tuple(actions), payoffs, tuple(base))


# ---------------------------------------------------------------------------
# exact evaluation

def _others_weight(strats, t, a, skip):
    w = Fraction(1)
    for j, aj in enumerate(a):
        if j != skip:
            w *= strats[j][t[j]][aj]
            if w == 0:
                return w
    return w


def action_values(fg: FiniteBayesianGame, strats, i: int, ti: str) -> list:
    """Prior-weighted expected payoff of every action of player ``i``
    (0-based) at type ``ti`` against the others' strategies."""
    n = len(fg.actions[i])
    vals = [Fraction(0)] * n
    others = [range(len(A)) for A in fg.actions]
    for t, p in fg.prior:
        if t[i] != ti or p == 0:
            continue
        for a in itertools.product(*others):
            w = _others_weight(strats, t, a, i)
            if w:
                vals[a[i]] += p * w * fg.payoffs[(t, a)][i]
    return vals


def regret(fg: FiniteBayesianGame, strats) -> Fraction:
    """Largest ex-ante gain any player gets from a type-contingent pure
    deviation."""
    worst = Fraction(0)
    for i in range(fg.players):
        gain = Fraction(0)
        for ti in fg.types[i]:
            if fg.marginal(i, ti) == 0:
                continue
            vals = action_values(fg, strats, i, ti)
            cur = sum((s * v for s, v in zip(strats[i][ti], vals)), Fraction(0))
            gain += max(vals) - cur
        worst = max(worst, gain)
    return worst


def _to_equilibrium(fg, strats, residual, method):
    return MixedEquilibrium(
        fg.actions,
        tuple(tuple((ti, tuple(strats[i][ti])) for ti in fg.types[i]) for i in range(fg.players)),
        residual, method)


def _fill(fg, strats):
    """Types with zero marginal get the first action."""
    for i in range(fg.players):
        for ti in fg.types[i]:
            if ti not in strats[i]:
                strats[i][ti] = [Fraction(int(k == 0)) for k in range(len(fg.actions[i]))]
    return strats


# ---------------------------------------------------------------------------
# support enumeration

def _solve(rows, ncols):
    """Exact solution of ``rows`` (each ``coeffs + [rhs]``) with free
    variables set to zero, or None when inconsistent."""
    a = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        pr = next((k for k in range(r, len(a)) if a[k][c] != 0), None)
        if pr is None:
            continue
        a[r], a[pr] = a[pr], a[r]
        piv = a[r][c]
        a[r] = [x / piv for x in a[r]]
        for k in range(len(a)):
            if k != r and a[k][c] != 0:
                f = a[k][c]
                a[k] = [x - f * y for x, y in zip(a[k], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    for k in range(r, len(a)):
        if a[k][ncols] != 0:
            return None
    x = [Fraction(0)] * ncols
    for k, c in enumerate(pivots):
        x[c] = a[k][ncols]
    return x


def _supports(n):
    out = []
    for size in range(1, n + 1):
        out.extend(itertools.combinations(range(n), size))
    return out


def _by_total_size(options, total):
    """Tuples of per-cell supports whose sizes add to ``total``, in
    lexicographic order of the per-cell ``(size, indices)`` keys."""
    if not options:
        if total == 0:
            yield ()
        return
    head, rest = options[0], options[1:]
    min_rest = len(rest)
    max_rest = sum(max(len(s) for s in opt) for opt in rest)
    for s in head:
        left = total - len(s)
        if min_rest <= left <= max_rest:
            for tail in _by_total_size(rest, left):
                yield (s,) + tail


def _check(fg, strats):
    for i in range(fg.players):
        for ti in fg.types[i]:
            if fg.marginal(i, ti) == 0:
                continue
            vals = action_values(fg, strats, i, ti)
            cur = sum((s * v for s, v in zip(strats[i][ti], vals)), Fraction(0))
            if max(vals) > cur:
                return False
    return True


def solve_support_enumeration(fg: FiniteBayesianGame, max_support_profiles: int = 200_000) -> MixedEquilibrium:
    """Exact equilibrium of a one- or two-player finite Bayesian game.

    Support profiles (one support per player and type) are tried by
    increasing total size, lexicographically within a size.  For each, the
    indifference and normalisation equations are solved exactly and the
    candidate is accepted only if every equilibrium inequality holds.
    """
    if fg.players > 2:
        raise SizeLimit("exact support enumeration handles at most two players; use regret mode")
    cells = fg.cells()
    options = [_supports(len(fg.actions[i])) for i, _ in cells]
    count = 1
    for opt in options:
        count *= len(opt)
    if count > max_support_profiles:
        raise SizeLimit(f"{count} support profiles exceed the cap of {max_support_profiles}")
    lo = len(cells)
    hi = sum(len(fg.actions[i]) for i, _ in cells)
    for total in range(lo, hi + 1):
        for supp in _by_total_size(options, total):
            strats = _solve_supports(fg, cells, supp)
            if strats is not None and _check(fg, strats):
                return _to_equilibrium(fg, _fill(fg, strats), Fraction(0), "support_enumeration")
    raise NoEquilibriumInSupports(f"no equilibrium among {count} support profiles")


def _solve_supports(fg, cells, supp):
    index = {}
    for (i, ti), s in zip(cells, supp):
        for a in s:
            index[(i, ti, a)] = len(index)
    values = {}
    for cell in cells:
        values[cell] = len(index) + len(values)
    n = len(index) + len(values)
    support_of = dict(zip(cells, supp))
    rows = []
    for (i, ti), s in zip(cells, supp):
        for a in s:
            row = [Fraction(0)] * (n + 1)
            row[values[(i, ti)]] = Fraction(-1)
            for t, p in fg.prior:
                if t[i] != ti or p == 0:
                    continue
                rest = [j for j in range(fg.players) if j != i]
                pools = [support_of[(j, t[j])] for j in rest]
                for combo in itertools.product(*pools):
                    prof = [0] * fg.players
                    prof[i] = a
                    for j, b in zip(rest, combo):
                        prof[j] = b
                    u = p * fg.payoffs[(t, tuple(prof))][i]
                    if not rest:
                        row[n] -= u
                    else:
                        # linear in the single other player's probability
                        (j, b), = zip(rest, combo)
                        row[index[(j, t[j], b)]] += u
            rows.append(row)
        norm = [Fraction(0)] * (n + 1)
        for a in s:
            norm[index[(i, ti, a)]] = Fraction(1)
        norm[n] = Fraction(1)
        rows.append(norm)
    x = _solve(rows, n)
    if x is None:
        return None
    strats = [dict() for _ in range(fg.players)]
    for (i, ti), s in zip(cells, supp):
        probs = [Fraction(0)] * len(fg.actions[i])
        for a in s:
            v = x[index[(i, ti, a)]]
            if v < 0:
                return None
            probs[a] = v
        strats[i][ti] = probs
    return strats


# ---------------------------------------------------------------------------
# regret matching

def _rationalize(vec, denom):
    fr = [Fraction(float(v)).limit_denominator(denom) for v in vec]
    fr = [max(f, Fraction(0)) for f in fr]
    s = sum(fr)
    if s == 0:
        fr = [Fraction(1, len(fr))] * len(fr)
    else:
        fr = [f / s for f in fr]
    return fr


def epsilon_ne_regret(fg: FiniteBayesianGame, epsilon, max_iterations: int = 20_000,
                      check_every: int = 250, seed: int = 0) -> MixedEquilibrium:
    """An ``epsilon``-equilibrium by regret matching+ on the agent form.

    The float average strategy is rounded to rationals and its regret is
    recomputed exactly; the result is returned only when that certified
    regret is at most ``epsilon``.
    """
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise SchemaError("regret mode needs epsilon > 0")
    rng = np.random.default_rng(seed)
    cells = fg.cells()
    sizes = [len(A) for A in fg.actions]
    prior = [(t, float(p)) for t, p in fg.prior if p > 0]
    tables = {t: np.array([[fg.payoffs[(t, a)][i] for a in itertools.product(*(range(n) for n in sizes))]
                           for i in range(fg.players)], dtype=float).reshape((fg.players, *sizes))
              for t, _ in prior}
    cum_regret = {c: np.zeros(sizes[c[0]]) for c in cells}
    cum_strat = {c: np.zeros(sizes[c[0]]) for c in cells}
    current = {c: np.full(sizes[c[0]], 1.0 / sizes[c[0]]) + 1e-3 * rng.random(sizes[c[0]]) for c in cells}
    for c in cells:
        current[c] /= current[c].sum()
    best = None
    for it in range(1, max_iterations + 1):
        vals = {c: np.zeros(sizes[c[0]]) for c in cells}
        for t, p in prior:
            for i in range(fg.players):
                arr = np.moveaxis(tables[t][i], i, 0)
                for j in reversed([j for j in range(fg.players) if j != i]):
                    arr = arr @ current[(j, t[j])]
                vals[(i, t[i])] += p * arr
        for c in cells:
            v = vals[c]
            cum_regret[c] = np.maximum(cum_regret[c] + v - current[c] @ v, 0.0)
            cum_strat[c] += it * current[c]
            tot = cum_regret[c].sum()
            current[c] = cum_regret[c] / tot if tot > 0 else np.full(sizes[c[0]], 1.0 / sizes[c[0]])
        if it % check_every == 0 or it == max_iterations:
            for denom in (10, 100, 1000, 10_000):
                strats = [dict() for _ in range(fg.players)]
                for c in cells:
                    avg = cum_strat[c] / cum_strat[c].sum()
                    strats[c[0]][c[1]] = _rationalize(avg, denom)
                strats = _fill(fg, strats)
                r = regret(fg, strats)
                if best is None or r < best[0]:
                    best = (r, strats)
                if r <= epsilon:
                    return _to_equilibrium(fg, strats, r, "regret_matching")
    eq = _to_equilibrium(fg, best[1], best[0], "regret_matching")
    raise IterationCapExceeded(
        f"certified regret {format_rational(best[0])} > {format_rational(epsilon)} after "
        f"{max_iterations} iterations", best=eq)


# ---------------------------------------------------------------------------
# sampler machines

def _layout(weights):
    q = sum(weights)
    bits = max(0, (q - 1).bit_length())
    copies = (1 << bits) // q
    cum = list(itertools.accumulate(weights))
    return q, bits, copies, cum


def _pick(x, copies, cum):
    idx = x // copies
    for k, s in enumerate(cum):
        if idx < s:
            return k
    return None


def lift_to_sampler_machine(mixed, player: int = 1, t: str = "", base: Optional[Sequence] = None,
                            label: Optional[str] = None) -> MachineProgram:
    """A machine that samples a base machine from a rational distribution
    and then runs it.

    ``mixed`` is a :class:`MixedEquilibrium` (read at ``player``/``t``) or
    a plain sequence of probabilities aligned with ``base``.  Each attempt
    reads a block of ``ceil(log2 q)`` random bits (``q`` the common
    denominator); values past the last full band restart the loop as soon
    as they are recognised, and a band is chosen only once its block is
    complete.  The law conditioned on resolving within any tape cap is
    therefore exact.  Dyadic weights, which never restart, resolve as
    early as possible.  A ``SELECT`` marks the hand-off.  A base program whose last
    instruction can fall through pays one extra ``JMP``.
    """
    if isinstance(mixed, MixedEquilibrium):
        probs = dict(mixed.strategies[player - 1])[t]
        if base is None:
            raise SchemaError("lifting an equilibrium needs the base machines of its actions")
    else:
        probs = [Fraction(p) for p in mixed]
    base = list(base)
    if len(base) != len(probs):
        raise SchemaError("one probability per base machine")
    if sum(probs) != 1 or any(p < 0 for p in probs):
        raise ProbabilityNotOne("sampler weights must form a distribution")
    q = math.lcm(*(Fraction(p).denominator for p in probs))
    weights = [int(Fraction(p) * q) for p in probs]
    q, bits, copies, cum = _layout(weights)
    if (1 << bits) > MAX_SAMPLER_LEAVES:
        raise SizeLimit(f"sampler needs {1 << bits} leaves; cap is {MAX_SAMPLER_LEAVES}")

    tree = []
    fixups = []
    exact_fit = copies * q == 1 << bits

    def node(prefix_val, depth):
        lo = prefix_val << (bits - depth)
        hi = (prefix_val + 1) << (bits - depth)
        if lo >= copies * q:
            tree.append(Instruction("JMP", (0,)))
            return
        # accepting before the block is complete would favour bands that
        # resolve early whenever the tape runs out mid-block; that is only
        # harmless when no bit string is ever rejected
        if hi <= copies * q and (depth == bits or exact_fit):
            k0, k1 = _pick(lo, copies, cum), _pick(hi - 1, copies, cum)
            if k0 == k1:
                fixups.append((len(tree), k0))
                tree.append(Instruction("JMP", (None,)))
                return
        here = len(tree)
        tree.append(Instruction("READ_RAND", (0,)))
        tree.append(Instruction("JNZ", (0, None)))
        node(prefix_val * 2, depth + 1)
        tree[here + 1] = Instruction("JNZ", (0, len(tree)))
        node(prefix_val * 2 + 1, depth + 1)

    node(0, 0)
    regs = 1 + max((p.register_count for p in base), default=0)
    starts = []
    blocks_len = [1 + p.size + (1 if p.instructions and p.instructions[-1].op not in ("HALT", "JMP") else 0)
                  for p in base]
    pos = len(tree)
    for n_ in blocks_len:
        starts.append(pos)
        pos += n_
    total = pos
    code = []
    for idx, ins in enumerate(tree):
        code.append(ins)
    for at, k in fixups:
        code[at] = Instruction("JMP", (starts[k],))
    for p, start in zip(base, starts):
        code.append(Instruction("SELECT", (p.size,)))
        code.extend(relocate(p, 1, start + 1, total))
    assert len(code) == total
    if label is None:
        label = "lift[" + ",".join(f"{p.label}:{format_rational(Fraction(w))}"
                                   for p, w in zip(base, probs)) + "]"
    return MachineProgram(tuple(code), regs, label)


def lifted_profile(game: GameSpec, fg: FiniteBayesianGame, eq: MixedEquilibrium):
    """One sampler per player.  Needs a single type per player, since a
    per-type mixture would need type-dependent selection."""
    from .profile import StrategyProfile

    progs = []
    for i in range(fg.players):
        if len(fg.types[i]) != 1:
            raise SchemaError("lifting to a profile needs one type per player")
        progs.append(lift_to_sampler_machine(eq, i + 1, fg.types[i][0], fg.base[i]))
    return StrategyProfile(tuple(progs))


__all__ = [
    "FiniteBayesianGame",
    "MixedEquilibrium",
    "action_values",
    "epsilon_ne_regret",
    "induce_finite_game",
    "lift_to_sampler_machine",
    "lifted_profile",
    "regret",
    "solve_support_enumeration",
]
