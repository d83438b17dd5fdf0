from fractions import Fraction

import pytest

from machinegames.errors import ExactModeOverflow
from machinegames.machines import roshambo_class
from machinegames.tapes import enumerate_joint, enumerate_tapes
from machinegames.vm import run_machine

R, P, S, U = roshambo_class()


def _law(prog, cap):
    law, lost = {}, Fraction(0)
    for _tape, w, res in enumerate_tapes(lambda tape: run_machine(prog, "", tape), cap):
        if res is None:
            lost += w
        else:
            law[res.output] = law.get(res.output, Fraction(0)) + w
    return law, lost


def test_deterministic_machine_has_one_leaf():
    leaves = list(enumerate_tapes(lambda tape: run_machine(R, "", tape), 8))
    assert len(leaves) == 1
    assert leaves[0][:2] == ("", 1)


def test_rejection_sampler_law():
    # four attempts of two bits each; all-rejected mass is (1/4)^4
    law, lost = _law(U, 8)
    assert lost == Fraction(1, 256)
    assert law == {"0": Fraction(85, 256), "1": Fraction(85, 256), "2": Fraction(85, 256)}


def test_odd_cap_truncates_half_attempt():
    law, lost = _law(U, 3)
    assert lost == Fraction(1, 4)
    assert sum(law.values()) + lost == 1


def test_enumeration_limit():
    with pytest.raises(ExactModeOverflow):
        list(enumerate_tapes(lambda tape: run_machine(U, "", tape), 16, limit=10))


def test_joint_enumeration_weights_sum_to_one():
    def run(tapes):
        a = run_machine(U, "", tapes["a"])
        b = run_machine(U, "", tapes["b"])
        return a.output + b.output

    total = sum(w for _t, w, _r in enumerate_joint(run, {"a": 4, "b": 4}))
    assert total == 1
