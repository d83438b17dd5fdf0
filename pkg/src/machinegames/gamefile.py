"""Game files: YAML (or JSON, which YAML reads) documents describing a
machine game, its profile and its candidate class.

Rationals are written ``"p/q"`` (plain integers and decimals are accepted
on input).  A minimal file::

    name: coin
    players: 1
    input_length: 1
    types:
      - {profile: ["0"], prob: 1/2}
      - {profile: ["1"], prob: 1/2}
    machines:
      echo: |
        registers: 1
        READ_TYPE r0
        EMITR r0
        HALT
    complexity: {default: {kind: steps}}
    utilities: ["1 if a1 == t1 else 0"]
    profile: [echo]
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import yaml

from .complexity import ComplexityFnSpec, validate_complexity_spec
from .equilibrium import CandidateClass
from .errors import DSLError, ExpressionError, InvalidSpec, SchemaError
from .expr import format_rational, parse_rational
from .game import ExprUtility, GameSpec, TableUtility
from .mediation import Functionality, MediatorSpec
from .profile import StrategyProfile, coalition, coalition_key
from .vm import BOT, MachineProgram, RunBudget, format_program, parse_program

SCHEMA_VERSION = 1

_KNOWN = {
    "schema_version", "name", "players", "input_length", "types", "machines", "complexity",
    "utilities", "coalition_utilities", "params", "flags", "utility_range", "budget", "rand_cap",
    "residual_tolerance", "mediator", "profile", "coalition_profile", "candidates", "coalitions",
    "description", "machine_class",
}


@dataclass(frozen=True)
class LoadedGame:
    """A game plus the optional profile and candidate class its file
    declares."""

    game: GameSpec
    profile: Optional[StrategyProfile] = None
    candidates: Optional[CandidateClass] = None


def _rational(v, where: str) -> Fraction:
    if isinstance(v, bool):
        raise SchemaError(f"{where}: expected a rational, got {v!r}")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(str(v))
    if isinstance(v, str):
        try:
            return parse_rational(v)
        except (ExpressionError, ValueError, ZeroDivisionError):
            pass
    raise SchemaError(f"{where}: expected a rational, got {v!r}")


def _param(v):
    """Parameters: rationals where they parse, otherwise left alone."""
    if isinstance(v, list):
        return [_param(x) for x in v]
    if isinstance(v, dict):
        return {k: _param(x) for k, x in v.items()}
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return Fraction(str(v)) if isinstance(v, float) else v
    if isinstance(v, str):
        try:
            return parse_rational(v)
        except (ExpressionError, ValueError, ZeroDivisionError):
            return v
    return v


def _key(k):
    """``"default"``, a player index, or a coalition ``"1,2"``."""
    if k == "default":
        return k
    if isinstance(k, int):
        return k
    parts = [p for p in str(k).replace(" ", "").split(",") if p]
    try:
        ids = [int(p) for p in parts]
    except ValueError:
        raise SchemaError(f"bad player/coalition key {k!r}") from None
    return ids[0] if len(ids) == 1 else coalition(ids)


def _zkey(z) -> str:
    return ",".join(str(i) for i in coalition_key(z))


def _dump_key(k) -> str:
    if k == "default":
        return k
    return str(k) if isinstance(k, int) else _zkey(k)


def _types(doc, players):
    rows = doc.get("types")
    if not isinstance(rows, list) or not rows:
        raise SchemaError("'types' must be a nonempty list of {profile, prob}")
    out = []
    for row in rows:
        if not isinstance(row, dict) or "profile" not in row or "prob" not in row:
            raise SchemaError(f"type row {row!r} needs 'profile' and 'prob'")
        prof = tuple(str(x) for x in row["profile"])
        if len(prof) not in (players, players + 1):
            raise SchemaError(f"type profile {list(prof)} must have {players} or {players + 1} entries")
        out.append((prof, _rational(row["prob"], "type probability")))
    return out


def _machines(doc):
    progs = {}
    for label, text in (doc.get("machines") or {}).items():
        label = str(label)
        if not isinstance(text, str):
            raise SchemaError(f"machine {label!r} must be DSL text")
        if "registers:" not in text:
            text = "registers: 8\n" + text
        try:
            progs[label] = parse_program(text, label=label)
        except DSLError as exc:
            raise SchemaError(f"machine {label!r}: {exc}") from exc
    return progs


def _machine_class(doc, machines):
    """The game's machine class: ``machine_class`` labels in order, or
    every machine in the file."""
    labels = doc.get("machine_class")
    if labels is None:
        return tuple(machines.values())
    return tuple(_resolve(x, machines, "machine_class") for x in labels)


def _utility(u, where):
    if isinstance(u, str):
        return ExprUtility(u)
    if isinstance(u, dict) and "table" in u:
        rows = []
        for row in u["table"]:
            try:
                t, a, v = row["types"], row["actions"], row["value"]
            except (TypeError, KeyError):
                raise SchemaError(f"{where}: table rows need types, actions and value") from None
            rows.append(((tuple(str(x) for x in t), tuple(str(x) for x in a)), _rational(v, where)))
        default = u.get("default")
        return TableUtility(tuple(rows), None if default is None else _rational(default, where))
    raise SchemaError(f"{where}: a utility is an expression string or {{table: ...}}")


def _mediator(doc):
    if doc is None:
        return None
    if not isinstance(doc, dict) or "kind" not in doc:
        raise SchemaError("mediator needs a 'kind'")
    doc = dict(doc)
    kind = doc.pop("kind")
    stage_limit = int(doc.pop("stage_limit", 64 if kind != "functionality" else 8))
    if kind == "comm":
        return MediatorSpec("comm", stage_limit=stage_limit)
    if kind == "functionality":
        f = doc.get("functionality")
        if isinstance(f, str):
            f = Functionality(f)
        elif isinstance(f, dict):
            f = Functionality("table", {str(k): str(v) for k, v in f.get("table", {}).items()},
                              int(f.get("rand_bits", 0)))
        else:
            raise SchemaError("functionality mediator needs 'functionality'")
        return MediatorSpec("functionality", int(doc.get("identity", 1)), f, int(doc.get("input_length", 0)),
                            stage_limit=stage_limit)
    if kind == "scripted":
        script = doc.pop("script", "")
        identity = int(doc.pop("identity", 1))
        return MediatorSpec("scripted", identity, script=script, params=_param(doc), stage_limit=stage_limit)
    raise SchemaError(f"unknown mediator kind {kind!r}")


def _resolve(label, machines, where):
    if label in ("bot", "⊥"):
        return BOT
    try:
        return machines[label]
    except KeyError:
        raise SchemaError(f"{where}: unknown machine {label!r}") from None


def load_game(source, validate: bool = True) -> LoadedGame:
    """Parse a game document (path, text or already-parsed mapping)."""
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text() if isinstance(source, Path) or (
            isinstance(source, str) and "\n" not in source and Path(source).exists()) else source
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise SchemaError(f"not a YAML/JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("a game file is a mapping")
    unknown = set(doc) - _KNOWN
    if unknown:
        raise SchemaError(f"unknown top-level keys {sorted(unknown)}")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}")
    try:
        players = int(doc["players"])
        input_length = int(doc.get("input_length", 1))
    except (KeyError, TypeError, ValueError):
        raise SchemaError("'players' (and 'input_length') must be integers") from None
    machines = _machines(doc)
    utils = doc.get("utilities")
    if not isinstance(utils, list):
        raise SchemaError("'utilities' must be a list, one per player")
    complexity = {}
    for k, spec in (doc.get("complexity") or {"default": {"kind": "steps"}}).items():
        if not isinstance(spec, dict) or "kind" not in spec:
            raise SchemaError(f"complexity {k!r} needs a 'kind'")
        complexity[_key(k)] = ComplexityFnSpec.from_dict(spec)
    flags = doc.get("flags") or {}
    budget = doc.get("budget")
    if budget is not None:
        try:
            budget = RunBudget(**{k: int(v) for k, v in budget.items()})
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad budget: {exc}") from exc
    rng = doc.get("utility_range")
    game = GameSpec.build(
        name=str(doc.get("name", "game")), players=players, input_length=input_length,
        types=_types(doc, players),
        utilities=[_utility(u, f"utility {i + 1}") for i, u in enumerate(utils)],
        machines=_machine_class(doc, machines), complexity=complexity,
        coalition_utilities={_key(k): _utility(u, f"coalition utility {k}")
                             for k, u in (doc.get("coalition_utilities") or {}).items()},
        params=_param(doc.get("params") or {}), mediator=_mediator(doc.get("mediator")),
        normalized=bool(flags.get("normalized", False)), monotone=bool(flags.get("monotone", False)),
        cheap=flags.get("cheap"),
        utility_range=None if rng is None else tuple(_rational(x, "utility_range") for x in rng),
        budget=budget, rand_cap=int(doc.get("rand_cap", 8)),
        residual_tolerance=_rational(doc.get("residual_tolerance", "1/16"), "residual_tolerance"),
        coalitions=[tuple(z) for z in doc.get("coalitions") or []],
    )
    if validate:
        _validate(game)
    profile = None
    if doc.get("profile") is not None:
        labels = doc["profile"]
        if len(labels) != players:
            raise SchemaError(f"profile needs {players} machines")
        over = {coalition(_key(k) if not isinstance(_key(k), int) else [_key(k)]):
                _resolve(v, machines, "coalition_profile")
                for k, v in (doc.get("coalition_profile") or {}).items()}
        profile = StrategyProfile(tuple(_resolve(x, machines, "profile") for x in labels), over)
    cands = None
    if doc.get("candidates") is not None:
        cands = _candidates(doc["candidates"], machines, players)
    return LoadedGame(game, profile, cands)


def _candidates(doc, machines, players):
    if isinstance(doc, list):
        doc = {"all": doc}
    label = str(doc.get("label", "declared"))
    per = {}
    every = [_resolve(x, machines, "candidates") for x in doc.get("all", [])]
    for i in range(1, players + 1):
        per[i] = list(every)
    for k, labels in (doc.get("players") or {}).items():
        per[int(k)] = per.get(int(k), []) + [_resolve(x, machines, "candidates") for x in labels]
    co = {}
    for k, labels in (doc.get("coalitions") or {}).items():
        z = _key(k)
        co[z if not isinstance(z, int) else frozenset({z})] = [_resolve(x, machines, "candidates")
                                                               for x in labels]
    return CandidateClass.make(label, per, co)


def _validate(game: GameSpec) -> None:
    probes = [BOT] + [m for m in game.machines if not m.is_bot][:8]
    if len(probes) < 2:
        return
    for key, spec in game.complexity:
        if spec.kind == "worst_case_plus_size":
            continue
        rep = validate_complexity_spec(spec, probes)
        if not rep.accepted:
            raise InvalidSpec(f"complexity spec for {key!r} breaks the zero-on-bot law: {rep.violations[0]}")


def _dump_param(v):
    if isinstance(v, Fraction):
        return format_rational(v) if v.denominator != 1 else int(v)
    if isinstance(v, tuple) and v and all(isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], str)
                                          for x in v):
        return {k: _dump_param(x) for k, x in v}
    if isinstance(v, (list, tuple)):
        return [_dump_param(x) for x in v]
    if isinstance(v, (frozenset, set)):
        return sorted(v)
    return v


def _dump_utility(u):
    if isinstance(u, ExprUtility):
        return u.source
    if isinstance(u, TableUtility):
        doc = {"table": [{"types": list(t), "actions": list(a), "value": format_rational(v)}
                         for (t, a), v in u.entries]}
        if u.default is not None:
            doc["default"] = format_rational(u.default)
        return doc
    raise SchemaError(f"utility {u!r} has no file form")


def dump_game(game: GameSpec, profile: Optional[StrategyProfile] = None,
              candidates: Optional[CandidateClass] = None, fmt: str = "yaml") -> str:
    """Serialise a game (and optionally a profile and candidate class)."""
    machines = {}

    def keep(p: MachineProgram) -> str:
        if p.is_bot:
            return "bot"
        text = format_program(p)
        if p.label in machines and machines[p.label] != text:
            raise SchemaError(f"two different machines share the label {p.label!r}")
        machines[p.label] = text
        return p.label

    klass = [keep(m) for m in game.machines]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": game.name,
        "players": game.players,
        "input_length": game.input_length,
        "types": [{"profile": list(t), "prob": format_rational(p)} for t, p in game.types],
        "complexity": {_dump_key(k): _dump_param(spec.as_dict()) for k, spec in game.complexity},
        "utilities": [_dump_utility(u) for u in game.utilities],
        "params": {k: _dump_param(v) for k, v in game.params},
        "flags": {"normalized": game.normalized, "monotone": game.monotone},
        "budget": {"max_steps": game.budget.max_steps, "max_output_bits": game.budget.max_output_bits,
                   "max_rand_bits": game.budget.max_rand_bits},
        "rand_cap": game.rand_cap,
        "residual_tolerance": format_rational(game.residual_tolerance),
    }
    doc["machine_class"] = klass
    if game.cheap is not None:
        doc["flags"]["cheap"] = game.cheap
    if game.coalition_utilities:
        doc["coalition_utilities"] = {_zkey(z): _dump_utility(u) for z, u in game.coalition_utilities}
    if game.utility_range is not None:
        doc["utility_range"] = [format_rational(x) for x in game.utility_range]
    if game.mediator is not None:
        doc["mediator"] = _dump_param(game.mediator.as_dict())
    if game.coalitions:
        doc["coalitions"] = [list(coalition_key(z)) for z in game.coalitions]
    if profile is not None:
        doc["profile"] = [keep(p) for p in profile.assignment]
        if profile.coalition_overrides:
            doc["coalition_profile"] = {_zkey(z): keep(p) for z, p in profile.coalition_overrides}
    if candidates is not None:
        cdoc = {"label": candidates.label,
                "players": {str(i): [keep(p) for p in ps] for i, ps in candidates.players}}
        if candidates.coalitions:
            cdoc["coalitions"] = {_zkey(z): [keep(p) for p in ps] for z, ps in candidates.coalitions}
        doc["candidates"] = cdoc
    doc["machines"] = dict(sorted(machines.items()))
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True, width=120)


def export_case(case, fmt: str = "yaml") -> str:
    """A case study as a game file."""
    return dump_game(case.game, case.profile, case.candidates, fmt)


__all__ = ["LoadedGame", "SCHEMA_VERSION", "dump_game", "export_case", "load_game"]
