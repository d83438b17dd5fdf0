"""Command-line entry point.

Exit status: 0 when the verdict holds (or the command succeeded), 2 when a
checked verdict fails, 1 on any error.  Reports go to stdout (or
``--output``) as JSON unless ``--format human`` is given.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import yaml

from . import cases
from .complexity import ComplexityFnSpec
from .equilibrium import (
    CandidateClass,
    SpeedupSpec,
    check_coalition_safe,
    check_epsilon_nash,
    check_p_robust,
    check_strong_universal_implementation,
    check_universal_implementation,
)
from .errors import MachineGameError, SchemaError
from .expr import parse_rational
from .game import expected_utility
from .gamefile import _candidates, _machines, _mediator, export_case, load_game
from .machines import constant
from .mediation import lambda_machine
from .profile import StrategyProfile, coalition
from .report import document, emit_report
from .solver import (
    epsilon_ne_regret,
    induce_finite_game,
    lift_to_sampler_machine,
    regret,
    solve_support_enumeration,
)
from .vm import BOT, format_program, parse_program, run_machine

COMMANDS = ("eval-utility", "check-nash", "check-robust", "check-coalition", "check-universal",
            "check-strong-universal", "solve", "run-case", "validate", "export-case")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    paths: list = field(default_factory=list)
    mode: str = "exact"
    seed: Optional[int] = None
    samples: int = 10_000
    confidence: float = 0.99
    limit: Optional[int] = None
    candidates: Optional[str] = None
    output: Optional[str] = None
    fmt: str = "structured"
    verbose: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.mode == "sampled" and self.seed is None:
            raise UsageError("sampled mode requires --seed")

    @property
    def sample_kw(self) -> dict:
        kw = {}
        if self.mode == "sampled":
            kw.update(seed=self.seed, samples=self.samples, confidence=self.confidence)
        if self.limit is not None:
            kw["limit"] = self.limit
        return kw


def _rat(text) -> Fraction:
    try:
        return parse_rational(str(text))
    except MachineGameError:
        raise UsageError(f"not a rational: {text!r}") from None


def _coalitions(text: str) -> list:
    """``"1,2;3"`` -> ``[{1,2}, {3}]``."""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if part:
            try:
                out.append(coalition(int(x) for x in part.split(",")))
            except ValueError:
                raise UsageError(f"bad coalition list {text!r}") from None
    return out


def _subject(text: str):
    ids = [int(x) for x in text.split(",")]
    return ids[0] if len(ids) == 1 else coalition(ids)


# ---------------------------------------------------------------------------
# loading helpers

def _load(cfg: RunConfig):
    if not cfg.paths:
        raise UsageError(f"{cfg.command} needs a game file")
    loaded = load_game(Path(cfg.paths[0]))
    prof = loaded.profile
    if cfg.options.get("profile"):
        labels = cfg.options["profile"].split(",")
        table = {m.label: m for m in loaded.game.machines}
        for m in (loaded.candidates.players if loaded.candidates else ()):
            for p in m[1]:
                table.setdefault(p.label, p)
        try:
            prof = StrategyProfile(tuple(BOT if x == "bot" else table[x] for x in labels))
        except KeyError as exc:
            raise UsageError(f"unknown machine {exc.args[0]!r} in --profile") from None
    return loaded, prof


def _class(cfg: RunConfig, loaded):
    if cfg.candidates:
        doc = yaml.safe_load(Path(cfg.candidates).read_text())
        if not isinstance(doc, dict):
            raise SchemaError("a candidate file is a mapping")
        machines = {m.label: m for m in loaded.game.machines}
        machines.update(_machines(doc))
        return _candidates(doc, machines, loaded.game.players)
    if loaded.candidates is not None:
        return loaded.candidates
    if loaded.game.machines:
        return CandidateClass.uniform("machine_class", loaded.game.machines, loaded.game.players)
    raise UsageError("no candidate class: declare 'candidates' in the game file or pass --candidates")


def _need_profile(prof):
    if prof is None:
        raise UsageError("no profile: declare 'profile' in the game file or pass --profile")
    return prof


# ---------------------------------------------------------------------------
# commands

def _verdict(rep) -> int:
    return 0 if rep.holds else 2


def cmd_eval(cfg):
    loaded, prof = _load(cfg)
    subject = _subject(cfg.options.get("subject") or "1")
    out = expected_utility(loaded.game, _need_profile(prof), subject, cfg.mode, **cfg.sample_kw)
    return 0, out


def cmd_nash(cfg):
    loaded, prof = _load(cfg)
    rep = check_epsilon_nash(loaded.game, _need_profile(prof), _rat(cfg.options["eps"]), _class(cfg, loaded),
                             cfg.mode, **cfg.sample_kw)
    return _verdict(rep), rep


def _speedup(cfg) -> SpeedupSpec:
    speedups = ()
    if cfg.options.get("speedups"):
        doc = yaml.safe_load(Path(cfg.options["speedups"]).read_text())
        speedups = tuple(
            tuple((k if k == "default" else int(k), ComplexityFnSpec.from_dict(v)) for k, v in entry.items())
            for entry in doc)
    mode = "explicit_list" if speedups else cfg.options.get("speedup_mode") or "favorable_deviator"
    return SpeedupSpec(cfg.options.get("p") or "t", mode, speedups, bool(cfg.options.get("homogeneous")))


def cmd_robust(cfg):
    loaded, prof = _load(cfg)
    zs = _coalitions(cfg.options["coalitions"]) if cfg.options.get("coalitions") else None
    rep = check_p_robust(loaded.game, _need_profile(prof), _speedup(cfg), _rat(cfg.options["eps"]),
                         _class(cfg, loaded), cfg.mode, coalitions=zs, **cfg.sample_kw)
    return _verdict(rep), rep


def cmd_coalition(cfg):
    loaded, prof = _load(cfg)
    if not cfg.options.get("coalitions"):
        raise UsageError("check-coalition needs --coalitions, e.g. '1,2;3'")
    rep = check_coalition_safe(loaded.game, _need_profile(prof), _coalitions(cfg.options["coalitions"]),
                               _rat(cfg.options["eps"]), _class(cfg, loaded), cfg.mode, **cfg.sample_kw)
    return _verdict(rep), rep


def _protocol(cfg):
    """A protocol file names the mediators, the protocol profile, the game
    family (paths relative to the file), the coalitions and the class."""
    if not cfg.paths:
        raise UsageError(f"{cfg.command} needs a protocol file")
    path = Path(cfg.paths[0])
    doc = yaml.safe_load(path.read_text())
    F = _mediator(doc.get("F"))
    Fp = _mediator(doc.get("F_prime", doc.get("F")))
    if F is None:
        raise SchemaError("protocol file needs a mediator 'F'")
    n = F.input_length or 1
    machines = {"lambda": lambda_machine(F.identity), "lambda~flip": lambda_machine(F.identity, True),
                "const0": constant("0" * n), "const1": constant("1" * n), "bot": BOT}
    for label, text in (doc.get("machines") or {}).items():
        machines[str(label)] = parse_program(text, label=str(label))
    try:
        prof = StrategyProfile(tuple(machines[x] for x in doc["profile"]))
        family = [load_game(path.parent / g).game for g in doc["family"]]
        if doc.get("candidates"):
            labels = doc["candidates"]
            cls = CandidateClass.uniform("protocol{" + ",".join(labels) + "}",
                                         [machines[x] for x in labels], prof.players)
        else:
            cls = cases.protocol_candidates(F.identity, n)
    except KeyError as exc:
        raise SchemaError(f"protocol file: missing or unknown {exc.args[0]!r}") from None
    zs = [tuple(z) for z in doc.get("coalitions", [[i] for i in range(1, prof.players + 1)])]
    p = SpeedupSpec(str(doc.get("p", "t")))
    eps = _rat(doc.get("epsilon", 0))
    return prof, Fp, F, family, zs, p, eps, cls, doc.get("subset_cap")


def cmd_universal(cfg):
    prof, Fp, F, family, zs, p, eps, cls, cap = _protocol(cfg)
    rep = check_universal_implementation(prof, Fp, F, family, zs, p, eps, cls, subset_cap=cap)
    return _verdict(rep), rep


def cmd_strong_universal(cfg):
    prof, Fp, F, family, zs, p, eps, cls, cap = _protocol(cfg)
    rep = check_strong_universal_implementation(prof, Fp, F, family, zs, p, eps, cls, subset_cap=cap)
    return _verdict(rep), rep


def _deterministic_members(game):
    out = []
    for m in game.machines:
        try:
            for t, _ in game.types:
                for i in range(game.players):
                    run_machine(m, t[i], "", budget=game.budget)
        except MachineGameError:
            continue
        out.append(m)
    return out


def cmd_solve(cfg):
    loaded, _ = _load(cfg)
    game = loaded.game
    if cfg.options.get("free_randomization"):
        game = game.with_complexity({k: ComplexityFnSpec.from_dict(dict(s.as_dict(), free_randomization=True))
                                     for k, s in game.complexity})
    elif cfg.options.get("assume_cheap"):
        pass
    else:
        raise UsageError("solve needs --assume-cheap or --free-randomization")
    table = {m.label: m for m in game.machines}
    if cfg.options.get("base"):
        base = [table[x] for x in cfg.options["base"].split(",")]
    else:
        base = _deterministic_members(game)
    fg = induce_finite_game(game, base)
    if cfg.options.get("regret"):
        eq = epsilon_ne_regret(fg, _rat(cfg.options.get("eps") or "1/100"))
    else:
        eq = solve_support_enumeration(fg)
    strats = [dict(eq.strategies[i]) for i in range(fg.players)]
    result = {"equilibrium": eq.as_dict(), "certificate": {"exact_regret": regret(fg, strats)},
              "actions": [list(a) for a in fg.actions]}
    if cfg.options.get("lift"):
        lifted = {}
        for i in range(fg.players):
            for t in fg.types[i]:
                prog = lift_to_sampler_machine(eq, i + 1, t, fg.base[i])
                lifted[f"{i + 1}:{t}"] = format_program(prog)
        result["lifted"] = lifted
    return 0, result


def _case_params(cfg):
    params = {}
    for k, v in cfg.options.get("params", {}).items():
        if v in ("true", "false"):
            params[k] = v == "true"
        else:
            try:
                r = parse_rational(v)
                params[k] = int(r) if r.denominator == 1 and "/" not in v else r
            except MachineGameError:
                params[k] = v
    return params


def cmd_run_case(cfg):
    name = cfg.options.get("case")
    bundle = cases.run_case(name, **_case_params(cfg))
    return (0 if bundle.passed else 2), bundle


def cmd_export_case(cfg):
    case = cases.build_case(cfg.options.get("case"), **_case_params(cfg))
    return 0, export_case(case, "json" if cfg.options.get("json") else "yaml")


def cmd_validate(cfg):
    loaded, prof = _load(cfg)
    g = loaded.game
    return 0, {"name": g.name, "players": g.players, "input_length": g.input_length,
               "type_profiles": len(g.types), "machines": [m.label for m in g.machines],
               "profile": None if prof is None else list(prof.labels),
               "candidate_class": None if loaded.candidates is None else loaded.candidates.label,
               "valid": True}


DISPATCH = {
    "eval-utility": cmd_eval,
    "check-nash": cmd_nash,
    "check-robust": cmd_robust,
    "check-coalition": cmd_coalition,
    "check-universal": cmd_universal,
    "check-strong-universal": cmd_strong_universal,
    "solve": cmd_solve,
    "run-case": cmd_run_case,
    "validate": cmd_validate,
    "export-case": cmd_export_case,
}


def dispatch(cfg: RunConfig):
    """Run one command; returns ``(exit status, result)``."""
    return DISPATCH[cfg.command](cfg)


# ---------------------------------------------------------------------------
# argument parsing

def _common(p):
    p.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--limit", type=int, help="enumeration limit for exact mode")
    p.add_argument("--candidates", help="candidate class file (YAML)")
    p.add_argument("--profile", help="comma-separated machine labels overriding the file's profile")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.add_argument("--format", dest="fmt", choices=("structured", "json", "human"), default="structured")
    p.add_argument("--verbose", "-v", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="machinegames", description="Bayesian machine games: utilities, "
                     "equilibrium checks, solvers and case studies.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    p = sub.add_parser("eval-utility", help="expected utility of a profile")
    p.add_argument("game")
    p.add_argument("--subject", default="1", help="player index or coalition like 1,2")
    _common(p)
    for name, desc in (("check-nash", "epsilon-Nash check over a candidate class"),
                       ("check-robust", "robustness under speedups and coalitions"),
                       ("check-coalition", "coalition deviations only")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("game")
        p.add_argument("--eps", default="0")
        if name == "check-robust":
            p.add_argument("--p", default="t", help="speedup bound as an expression in n and t")
            p.add_argument("--speedups", help="YAML list of explicit sped-up complexity maps")
            p.add_argument("--homogeneous", action="store_true")
            p.add_argument("--coalitions")
        if name == "check-coalition":
            p.add_argument("--coalitions", required=True)
        _common(p)
    for name in ("check-universal", "check-strong-universal"):
        p = sub.add_parser(name, help="implementation check of a protocol file")
        p.add_argument("protocol", help="protocol file naming F, F_prime, profile and family")
        _common(p)
    p = sub.add_parser("solve", help="induce a finite game and solve it exactly")
    p.add_argument("game")
    p.add_argument("--assume-cheap", action="store_true")
    p.add_argument("--free-randomization", action="store_true")
    p.add_argument("--regret", action="store_true", help="approximate by regret matching")
    p.add_argument("--eps", help="target regret in regret mode")
    p.add_argument("--base", help="comma-separated base machine labels")
    p.add_argument("--lift", action="store_true", help="emit sampler machines in DSL form")
    _common(p)
    for name, desc in (("run-case", "run a bundled case study"), ("export-case", "write a case study as a game file")):
        p = sub.add_parser(name, help=desc, description="Extra --key value pairs become builder parameters.")
        p.add_argument("case", choices=sorted(cases.BUILDERS))
        if name == "export-case":
            p.add_argument("--json", action="store_true")
        _common(p)
    p = sub.add_parser("validate", help="parse and validate a game file")
    p.add_argument("game")
    _common(p)
    return parser


def _extra_params(rest: list) -> dict:
    params = {}
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        elif i + 1 < len(rest) and not rest[i + 1].startswith("--"):
            val = rest[i + 1]
            i += 2
        else:
            val = "true"
            i += 1
        params[key] = val
    return params


def parse_config(argv) -> RunConfig:
    parser = build_parser()
    ns, rest = parser.parse_known_args(argv)
    if not ns.command:
        raise UsageError("missing command; one of " + ", ".join(COMMANDS))
    opts = {k: v for k, v in vars(ns).items()
            if k not in ("command", "game", "protocol", "mode", "seed", "samples", "confidence", "limit",
                         "candidates", "output", "fmt", "verbose")}
    if rest:
        if ns.command not in ("run-case", "export-case"):
            raise UsageError(f"unrecognized arguments: {' '.join(rest)}")
        opts["params"] = _extra_params(rest)
    paths = [x for x in (getattr(ns, "game", None), getattr(ns, "protocol", None)) if x]
    return RunConfig(ns.command, paths, ns.mode, ns.seed, ns.samples, ns.confidence, ns.limit,
                     ns.candidates, ns.output, ns.fmt, ns.verbose, opts)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"machinegames: usage error: {exc}", file=sys.stderr)
        return 1
    try:
        status, result = dispatch(cfg)
    except (MachineGameError, UsageError, OSError, yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        print(f"machinegames: {type(exc).__name__}: {exc}", file=sys.stderr)
        if cfg.verbose:
            raise
        return 1
    if isinstance(result, str):
        text = result
    else:
        extra = {"mode": cfg.mode}
        if cfg.mode == "sampled":
            extra.update(seed=cfg.seed, samples=cfg.samples, confidence=cfg.confidence)
        doc = document(cfg.command, result, {0: "holds", 2: "fails"}[status], **extra)
        text = emit_report(doc, cfg.fmt)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
