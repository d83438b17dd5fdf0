import hashlib
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from machinegames import check_epsilon_nash
from machinegames.cases import build_case
from machinegames.cli import main
from machinegames.gamefile import export_case

DEMO = Path(__file__).resolve().parent.parent / "demos" / "games"


@pytest.fixture
def games(tmp_path):
    for f in DEMO.iterdir():
        shutil.copy(f, tmp_path / f.name)
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_nash_failure_exits_2_with_witness(capsys, games):
    code, out, _ = run(capsys, "check-nash", games / "roshambo.game", "--eps", "0/1")
    assert code == 2
    doc = json.loads(out)
    assert doc["schema_version"] == 1 and doc["status"] == "fails"
    assert doc["result"]["subjects"][0]["witness"] == "bot"
    assert doc["result"]["subjects"][0]["max_gap"] == "1/1"


def test_nash_success_exits_0(capsys, games):
    code, _, _ = run(capsys, "check-nash", games / "roshambo.game", "--eps", "1")
    assert code == 0


def test_run_case_frpd(capsys):
    code, out, _ = run(capsys, "run-case", "frpd", "--N", "10", "--delta", "9/10", "--alpha", "7/10")
    assert code == 0
    assert json.loads(out)["result"]["passed"] is True


def test_validate_broken(capsys, games):
    code, out, err = run(capsys, "validate", games / "broken.game")
    assert code == 1 and out == ""
    assert "ProbabilityNotOne" in err


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["check-nash"],
    ["check-nash", "missing.game"],
    ["run-case", "chess"],
    ["run-case", "roshambo", "--no-such-param", "1"],
    ["eval-utility", "x.game", "--mode", "sampled"],
    ["check-nash", "x.game", "--eps", "half"],
])
def test_errors_exit_1(capsys, games, argv):
    code, out, err = run(capsys, *[games / a if a.endswith(".game") else a for a in argv])
    assert code == 1
    assert err.startswith("machinegames:")


def test_structured_output_is_byte_identical(capsys, games):
    argv = ("check-nash", games / "roshambo.game", "--profile", "R,P")
    first = run(capsys, *argv)
    assert first == run(capsys, *argv)


def test_sampled_reports(capsys, games):
    argv = ("eval-utility", games / "roshambo.game", "--profile", "U,R", "--mode", "sampled", "--samples", "3000")
    a = run(capsys, *argv, "--seed", "1")
    assert a == run(capsys, *argv, "--seed", "1")
    b = run(capsys, *argv, "--seed", "2")
    ra, rb = json.loads(a[1])["result"], json.loads(b[1])["result"]
    assert ra["estimate"] != rb["estimate"]
    assert abs(float(ra["estimate"]) - float(rb["estimate"])) <= float(ra["half_width"]) + float(rb["half_width"])


def test_human_format(capsys, games):
    code, out, _ = run(capsys, "check-nash", games / "roshambo.game", "--format", "human")
    assert code == 2
    assert out.splitlines()[0] == "check-nash: FAILS over class roshambo{R,P,S,U} at epsilon=0/1"


def test_output_file(capsys, games, tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = run(capsys, "validate", games / "roshambo.game", "--output", target)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["result"]["valid"] is True


def test_solve_and_lift(capsys, games):
    code, out, _ = run(capsys, "solve", games / "roshambo.game", "--free-randomization", "--lift")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["certificate"]["exact_regret"] == "0/1"
    assert res["equilibrium"]["players"][0][""] == {"R": "1/3", "P": "1/3", "S": "1/3"}
    assert "SELECT" in res["lifted"]["1:"]
    assert run(capsys, "solve", games / "roshambo.game")[0] == 1


@pytest.mark.parametrize("protocol, command, expected", [
    ("universal.protocol", "check-universal", 0),
    ("corrupted.protocol", "check-universal", 2),
    ("leak.protocol", "check-strong-universal", 2),
])
def test_protocol_checks(capsys, games, protocol, command, expected):
    assert run(capsys, command, games / protocol)[0] == expected


def test_robust_and_coalition(capsys, games):
    assert run(capsys, "check-robust", games / "roshambo.game", "--p", "2*t", "--eps", "1")[0] == 0
    assert run(capsys, "check-coalition", games / "roshambo.game", "--coalitions", "1,2")[0] == 2


@pytest.mark.parametrize("name", ["roshambo", "primality", "revelation", "universal"])
def test_exit_codes_match_the_library(capsys, tmp_path, name):
    case = build_case(name)
    path = tmp_path / f"{name}.game"
    path.write_text(export_case(case))
    expect = check_epsilon_nash(case.game, case.profile, 0, case.candidates).holds
    assert run(capsys, "check-nash", path)[0] == (0 if expect else 2)
    assert run(capsys, "run-case", name)[0] == 0


def test_inputs_are_not_modified(capsys, games):
    before = {f.name: hashlib.sha256(f.read_bytes()).hexdigest() for f in games.iterdir()}
    run(capsys, "check-nash", games / "roshambo.game")
    run(capsys, "check-universal", games / "universal.protocol")
    run(capsys, "solve", games / "roshambo.game", "--free-randomization")
    after = {f.name: hashlib.sha256(f.read_bytes()).hexdigest() for f in games.iterdir()}
    assert before == after


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "machinegames", "validate", str(DEMO / "broken.game")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "ProbabilityNotOne" in proc.stderr
