"""Exact enumeration of random tapes by lazy prefix branching.

Instead of running a machine on all ``2**R`` tapes, a run starts with empty
tapes; whenever some participant asks for a bit it does not have yet, the run
is repeated with that tape extended by ``0`` and by ``1``.  Every leaf is a
set of finite prefixes carrying probability ``2**-(total length)``, and the
leaves partition the tape space.  Runs that exceed their budget are reported
as unresolved leaves (``result is None``).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterator, Mapping

from .errors import ExactModeOverflow, TapeExhausted

DEFAULT_LIMIT = 200_000


def enumerate_joint(run: Callable[[dict], object], caps: Mapping,
                    limit: int = DEFAULT_LIMIT) -> Iterator[tuple]:
    """Yield ``(tapes, weight, result)`` leaves in a fixed depth-first order.

    ``run`` receives a dict of tape prefixes keyed like ``caps`` and either
    returns a result or raises :class:`TapeExhausted` whose ``participant``
    names the tape to extend.  ``caps`` bounds each tape's length.
    """
    stack = [{k: "" for k in caps}]
    count = 0
    while stack:
        tapes = stack.pop()
        count += 1
        if count > limit:
            raise ExactModeOverflow(f"tape enumeration exceeded {limit} runs")
        weight = Fraction(1, 2 ** sum(len(t) for t in tapes.values()))
        try:
            result = run(tapes)
        except TapeExhausted as exc:
            who = exc.participant
            if who in tapes and len(tapes[who]) < caps[who]:
                for bit in "10":
                    ext = dict(tapes)
                    ext[who] = tapes[who] + bit
                    stack.append(ext)
            else:
                yield tapes, weight, None
            continue
        yield tapes, weight, result


def enumerate_tapes(run: Callable[[str], object], cap: int,
                    limit: int = DEFAULT_LIMIT) -> Iterator[tuple]:
    """Single-tape version of :func:`enumerate_joint`."""

    def joint(tapes):
        try:
            return run(tapes[0])
        except TapeExhausted as exc:
            exc.participant = 0
            raise

    for tapes, weight, result in enumerate_joint(joint, {0: cap}, limit):
        yield tapes[0], weight, result
