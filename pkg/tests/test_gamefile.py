import json
from pathlib import Path

import pytest
import yaml

from machinegames.cases import BUILDERS, build_case
from machinegames.errors import ProbabilityNotOne, SchemaError
from machinegames.gamefile import dump_game, export_case, load_game

GAMES = Path(__file__).resolve().parent.parent / "demos" / "games"


@pytest.mark.parametrize("name", sorted(BUILDERS))
@pytest.mark.parametrize("fmt", ["yaml", "json"])
def test_case_export_round_trips(name, fmt):
    case = build_case(name)
    loaded = load_game(export_case(case, fmt), validate=False)
    assert loaded.game == case.game
    assert loaded.profile == case.profile


def test_shipped_game_file():
    loaded = load_game(GAMES / "roshambo.game")
    assert [m.label for m in loaded.game.machines] == ["R", "P", "S", "U"]
    assert loaded.profile.labels == ("U", "U")
    assert loaded.candidates.label == "roshambo{R,P,S,U}"
    # the hand-written file describes the same game as the builder
    built = build_case("roshambo").game
    assert loaded.game.utilities == built.utilities
    assert dict(loaded.game.params) == dict(built.params)


def test_broken_probabilities():
    with pytest.raises(ProbabilityNotOne):
        load_game(GAMES / "broken.game")


def minimal(**over):
    doc = {"players": 1, "types": [{"profile": ["0"], "prob": 1}], "utilities": ["1"]}
    doc.update(over)
    return doc


def test_minimal_document_defaults():
    g = load_game(minimal()).game
    assert g.complexity[0][1].kind == "steps"
    assert g.input_length == 1


@pytest.mark.parametrize("bad", [
    {"colour": "red"},
    {"schema_version": 2},
    {"players": "two"},
    {"utilities": "1"},
    {"types": []},
    {"machines": {"m": "registers: 1\nFROB r0"}},
    {"complexity": {"default": {"weights": {}}}},
    {"profile": ["nobody"]},
    {"mediator": {"kind": "oracle"}},
])
def test_schema_errors(bad):
    with pytest.raises(SchemaError):
        load_game(minimal(**bad))


def test_rationals_are_exact():
    doc = minimal(types=[{"profile": ["0"], "prob": "1/3"}, {"profile": ["1"], "prob": "2/3"}])
    g = load_game(doc).game
    assert [str(p) for _, p in g.types] == ["1/3", "2/3"]


def test_dump_is_valid_yaml_and_json():
    g = build_case("primality").game
    assert yaml.safe_load(dump_game(g))["name"] == "primality"
    assert json.loads(dump_game(g, fmt="json"))["name"] == "primality"
