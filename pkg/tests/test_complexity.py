import random
from fractions import Fraction

import pytest
from hypothesis import given, settings

from _gen import SHIPPED_SPECS, programs, random_program
from machinegames.complexity import (
    ComplexityFnSpec,
    check_speedup,
    evaluate_complexity,
    validate_complexity_spec,
    worst_case_complexity,
)
from machinegames.errors import InvalidSpec, TapeExhausted
from machinegames.machines import roshambo_class, trial_division
from machinegames.solver import lift_to_sampler_machine
from machinegames.vm import BOT, RunBudget, run_machine

R, P, S, U = roshambo_class()


def charge(spec, prog, t="", tape=""):
    res = run_machine(prog, t, tape)
    return evaluate_complexity(spec, prog, res.view, res.meter)


def test_steps_and_size():
    assert charge(ComplexityFnSpec("steps"), R) == 2
    assert charge(ComplexityFnSpec("steps"), U, tape="1100") == 7 + 11
    assert charge(ComplexityFnSpec("size"), U, tape="00") == 11


def test_rand_charge():
    spec = ComplexityFnSpec.make("rand_charge", deterministic=1, randomized=2)
    assert charge(spec, R) == 1
    assert charge(spec, U, tape="00") == 2


def test_coarse_threshold():
    spec = ComplexityFnSpec.make("coarse_threshold", threshold=2)
    assert charge(spec, R) == 1
    assert charge(spec, trial_division(), "1011") == 2


def test_weighted_sum():
    spec = ComplexityFnSpec.make("weighted_sum", offset=1, weights={"steps": 1, "rand_bits": 3})
    assert charge(spec, U, tape="01") == 1 + 11 + 3 * 2


def test_weighted_sum_unknown_field():
    spec = ComplexityFnSpec.make("weighted_sum", weights={"joules": 1})
    with pytest.raises(InvalidSpec):
        charge(spec, R)


def test_worst_case_plus_size():
    assert worst_case_complexity(None, R, 2, RunBudget()) == 2 + 2
    spec = ComplexityFnSpec.make("worst_case_plus_size", input_length=1)
    # U's slowest resolved run within 16 bits is eight attempts
    assert charge(spec, U, tape="00") == (7 * 7 + 11) + 11


def test_constant_for_protocol_falls_back_to_steps():
    spec = ComplexityFnSpec.make("constant_for_protocol", c0=1, labels=["U"])
    assert charge(spec, U, tape="1111111100") == 1
    assert charge(spec, R) == 2


def test_free_randomization_charges_the_selected_machine():
    spec = ComplexityFnSpec.make("steps", free_randomization=True)
    lifted = lift_to_sampler_machine([Fraction(1, 2), Fraction(1, 2)], base=[R, P])
    # READ_RAND, JNZ, JMP, SELECT, then R's own two steps
    assert charge(ComplexityFnSpec("steps"), lifted, tape="0") == 6
    assert charge(spec, lifted, tape="0") == charge(ComplexityFnSpec("steps"), R) == 2


def test_bad_spec_detected_by_validation():
    zero_off_bot = ComplexityFnSpec.make("weighted_sum", offset=0, weights={"rand_bits": 1})
    report = validate_complexity_spec(zero_off_bot, [BOT, R, U])
    assert not report.accepted
    assert any(label == "R" for label, *_ in report.violations)


def test_validation_needs_bot_in_probes():
    with pytest.raises(InvalidSpec):
        validate_complexity_spec(ComplexityFnSpec("steps"), [R])


def test_check_speedup():
    slow = ComplexityFnSpec.make("weighted_sum", offset=0, weights={"steps": 2})
    fast = ComplexityFnSpec("steps")
    samples = []
    for prog in (R, trial_division()):
        res = run_machine(prog, "1011")
        samples.append((prog, res.view, res.meter, 4))
    assert check_speedup(fast, slow, lambda n, t: 2 * t, samples) == []
    assert len(check_speedup(fast, slow, lambda n, t: t, samples)) == 2


@pytest.mark.parametrize("spec", SHIPPED_SPECS, ids=lambda s: s.kind + ("+free" if s.get("free_randomization") else ""))
def test_shipped_specs_pass_validation(spec):
    probes = [BOT, R, U, trial_division()] + [random_program(random.Random(k)) for k in range(4)]
    assert validate_complexity_spec(spec, probes, RunBudget(max_steps=200, max_rand_bits=6)).accepted


@settings(max_examples=100, deadline=None)
@given(programs)
def test_bot_is_the_only_zero(prog):
    for spec in SHIPPED_SPECS:
        try:
            res = run_machine(prog, "01", "0110")
        except TapeExhausted:
            continue
        assert evaluate_complexity(spec, prog, res.view, res.meter) >= 1
        assert evaluate_complexity(spec, BOT, res.view, res.meter) == 0
