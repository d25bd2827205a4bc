"""Shared test utilities: random feasible constraint sets."""

import random
from fractions import Fraction

from pruw.errors import PruwError
from pruw.hetero import ConstraintSet, plan_hetero

DENOMS = (8, 10, 12, 16, 20, 24)


def random_heterogeneous(rng: random.Random) -> ConstraintSet:
    """One random heterogeneous constraint set (not necessarily plannable)."""
    n = rng.randint(4, 20)
    denom = rng.choice(DENOMS)
    values = [Fraction(rng.randint(max(1, denom // 3), denom), denom) for _ in range(n)]
    if len(set(values)) == 1:
        bump = values[0] - Fraction(1, denom)
        values[0] = bump if bump > 0 else values[0] + Fraction(1, denom)
    return ConstraintSet(tuple(values))


def random_plannable(rng: random.Random, **kwargs):
    """Rejection-sample until the planner accepts; returns (cs, plan)."""
    while True:
        cs = random_heterogeneous(rng)
        try:
            return cs, plan_hetero(cs, **kwargs)
        except PruwError:
            continue
