import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _gen import programs, random_tape, random_type
from machinegames.errors import BudgetExceeded, DSLError, InvalidProgram, PortFault, TapeExhausted
from machinegames.machines import constant, roshambo_class, trial_division
from machinegames.vm import (
    BOT,
    MachineProgram,
    RunBudget,
    format_program,
    max_random_bits,
    parse_program,
    program,
    run_machine,
)

R, P, S, U = roshambo_class()


def test_constant_machine_meters():
    out, view, meter = run_machine(R, "")
    assert out == "0"
    assert meter.steps == 2 and meter.rand_bits == 0
    assert view.random_prefix == ""


def test_bot_does_nothing():
    out, view, meter = run_machine(BOT, "0101", "1111")
    assert out == ""
    assert meter.steps == 0 and meter.program_size == 0
    assert view.type_prefix == ("",) and view.random_prefix == ""


def test_view_records_only_consumed_bits():
    rd = program("rd", 2, "READ_TYPE r0", "READ_TYPE r1", "EMITR r1", "HALT")
    res = run_machine(rd, "101")
    assert res.output == "0"
    assert res.view.type_prefix == ("10",)
    assert res.view.type_exhausted == (False,)
    # reading past the end yields -1 and marks the type exhausted
    res = run_machine(rd, "1")
    assert res.output == "-1"
    assert res.view.type_exhausted == (True,)


def test_rejection_sampler_reads_pairs():
    # 11 is rejected, 01 maps to (1 + 2) % 3 = 0
    assert run_machine(U, "", "1101").output == "0"
    assert run_machine(U, "", "1101").view.random_prefix == "1101"
    assert run_machine(U, "", "00").output == "2"
    with pytest.raises(TapeExhausted):
        run_machine(U, "", "1")


def test_step_budget():
    loop = program("loop", 1, "L0:", "JMP L0")
    with pytest.raises(BudgetExceeded):
        run_machine(loop, "", budget=RunBudget(max_steps=50))


def test_output_budget():
    chatty = program("chatty", 1, "L0:", 'EMIT "0101"', "JMP L0")
    with pytest.raises(BudgetExceeded):
        run_machine(chatty, "", budget=RunBudget(max_steps=10_000, max_output_bits=16))


def test_send_without_environment():
    sender = program("s", 0, 'SENDS "1"', "HALT")
    with pytest.raises(PortFault):
        run_machine(sender, "")


def test_trial_division_decides_primality():
    for n in range(2, 16):
        t = format(n, "04b")
        expect = "1" if all(n % d for d in range(2, n)) else "0"
        assert run_machine(trial_division(), t).output == expect, n


@pytest.mark.parametrize("text", [
    "registers: 1\nFOO r0",
    "registers: 1\nJMP nowhere",
    "registers: 1\nLOAD r9 1",
    "registers: 1\nEMIT unquoted",
])
def test_dsl_errors(text):
    with pytest.raises((DSLError, InvalidProgram)):
        parse_program(text)


def test_invalid_jump_rejected():
    from machinegames.vm import Instruction

    with pytest.raises(InvalidProgram):
        MachineProgram((Instruction("JMP", (7,)),), 0, "bad")


def test_format_parse_round_trip_on_library_machines():
    for prog in (R, U, trial_division(), constant("0110")):
        again = parse_program(format_program(prog))
        assert again == prog


def test_max_random_bits():
    assert max_random_bits(R, RunBudget()) == 0
    # the rejection loop can read up to the cap
    assert max_random_bits(U, RunBudget(max_rand_bits=8)) == 8


@settings(max_examples=200, deadline=None)
@given(programs)
def test_format_round_trip(prog):
    assert parse_program(format_program(prog)) == prog


@settings(max_examples=200, deadline=None)
@given(programs, st.integers(0, 10**9))
def test_runs_are_deterministic(prog, seed):
    rng = random.Random(seed)
    t, tape = random_type(rng), random_tape(rng)

    def attempt():
        try:
            return run_machine(prog, t, tape)
        except TapeExhausted as exc:
            return type(exc)

    assert attempt() == attempt()
