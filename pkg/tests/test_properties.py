"""Generated-input properties: the bot-zero law, determinism and view
sufficiency, gap behaviour under rescaling, speedups and class growth, and
agreement of sampled estimates with exact values."""

from fractions import Fraction

import pytest
from hypothesis import given, reject, settings
from hypothesis import strategies as st

import _props
from _gen import programs, seeds
from _props import Skip

types = st.text("01", max_size=4)
tapes = st.text("01", max_size=12)


@settings(max_examples=100, deadline=None)
@given(programs)
def test_bot_zero_law(prog):
    _props.bot_zero_law(prog)


@settings(max_examples=300, deadline=None)
@given(programs, types, tapes)
def test_determinism_and_view_sufficiency(prog, t, tape):
    _props.determinism_and_views(prog, t, tape)


def _guard(fn, *args):
    try:
        fn(*args)
    except Skip:
        reject()


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(1, 4), st.integers(-6, 6))
def test_affine_rescaling_scales_gaps(seed, num, den, shift):
    _guard(_props.affine_scaling, seed, Fraction(num, den), Fraction(shift, 2))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_larger_speedups_never_shrink_gaps(seed):
    _guard(_props.speedup_monotone, seed)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_larger_classes_never_shrink_gaps(seed):
    _guard(_props.class_monotone, seed)


@pytest.mark.parametrize("name, game, profile", _props.hoeffding_targets(), ids=lambda v: v if isinstance(v, str) else "")
def test_sampled_estimates_cover_exact_value(name, game, profile):
    # a lighter version of the acceptance harness: 40 seeds, 2000 draws
    bad = _props.hoeffding_failures(game, profile, range(1000, 1040), samples=2000)
    assert bad <= 2, (name, bad)
