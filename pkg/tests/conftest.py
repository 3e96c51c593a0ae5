"""Shared oracles and generators for the test suite.

The rounding oracle here is deliberately independent of the implementation:
it materializes the whole float set (tiny L, K only) and picks the nearest
member by exact rational comparison, ties resolved to the even multiple of
the local spacing.
"""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from cperturb.softfloat import enumerate_floats, max_magnitude


def nearest_by_enumeration(x: Fraction, L: int, K: int) -> Fraction:
    """Brute-force nearest member of F_{L,K}, ties to even significand."""
    x = Fraction(x)
    members = list(enumerate_floats(-max_magnitude(L, K), max_magnitude(L, K), L, K))
    best = None
    best_dist = None
    for v in members:
        dist = abs(v - x)
        if best is None or dist < best_dist:
            best, best_dist = [v], dist
        elif dist == best_dist:
            best.append(v)
    if len(best) == 1:
        return best[0]
    # two equidistant neighbors: even multiple of their spacing wins
    a, b = sorted(best)
    spacing = b - a
    return a if (a / spacing) % 2 == 0 else b


def random_rational(rng: random.Random, max_num: int = 1 << 12) -> Fraction:
    return Fraction(rng.randint(-max_num, max_num), rng.randint(1, max_num))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20120329)
