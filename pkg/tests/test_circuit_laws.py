from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qamod.circuit_laws import (
    BOUND,
    arithmetic_bound,
    fuzz,
    geometric_extremal_chain,
    harmonic_sum,
    random_chain,
    validate_chain,
)
from qamod.errors import InputError

pos = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


def exact_ratio(a, b) -> Fraction:
    a = [Fraction(x) for x in a]
    b = [Fraction(x) for x in b]
    return sum(a) ** 2 / (b[0] * sum(b))


@pytest.mark.parametrize(
    "values, expected",
    [((2, 2), 1.0), ((3.5, math.inf), 3.5), ((1, 1, 1), 1 / 3), ((math.inf, math.inf), math.inf)],
)
def test_harmonic_sum_examples(values, expected):
    assert harmonic_sum(values) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("values", [(), (1, 0), (1, -2), (float("nan"),)])
def test_harmonic_sum_rejects(values):
    with pytest.raises(InputError):
        harmonic_sum(values)


@settings(max_examples=200)
@given(st.lists(pos, min_size=1, max_size=8), st.randoms(use_true_random=False))
def test_harmonic_sum_commutative_and_below_min(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert harmonic_sum(ys) == pytest.approx(harmonic_sum(xs), rel=1e-12)
    assert harmonic_sum(xs) <= min(xs) * (1 + 1e-12)


@settings(max_examples=200)
@given(pos, pos, pos)
def test_harmonic_sum_associative_and_conjugate(x, y, z):
    left = harmonic_sum((harmonic_sum((x, y)), z))
    right = harmonic_sum((x, harmonic_sum((y, z))))
    assert left == pytest.approx(right, rel=1e-12)
    assert 1 / harmonic_sum((x, y)) == pytest.approx(1 / x + 1 / y, rel=1e-12)


@settings(max_examples=100)
@given(pos, pos, st.floats(1.001, 10))
def test_harmonic_sum_strictly_monotone(x, y, k):
    assert harmonic_sum((x * k, y)) > harmonic_sum((x, y))


def test_validate_examples():
    assert validate_chain((1, 1 / 2, 1 / 3), (1, 1, 1)).valid
    v = validate_chain((1, 0.6), (1, 1))
    assert not v.valid and v.index == 2
    assert validate_chain((5,), (5,)).valid
    v = validate_chain((1, 0.1), (2, 1))
    assert not v.valid and v.index == 1
    with pytest.raises(InputError):
        validate_chain((1, 2), (1,))


def test_bound_examples_against_exact_arithmetic():
    r = arithmetic_bound((1, 1 / 2, 1 / 3), (1, 1, 1))
    assert r.ratio == pytest.approx(float(Fraction(11, 6) ** 2 / 3), rel=1e-14)
    assert r.ratio == pytest.approx(121 / 108, rel=1e-14)
    assert arithmetic_bound((1,), (1,)).ratio == 1.0
    assert arithmetic_bound((1, 1 / 2), (1, 1)).ratio == pytest.approx(1.125, rel=1e-15)
    with pytest.raises(InputError, match="index 2"):
        arithmetic_bound((1, 0.6), (1, 1))


def test_two_term_maximum_is_32_over_27():
    # a = (1, s), b = (1, s/(1-s)) gives (1+s)^2 (1-s), maximal at s = 1/3.
    best = max(
        (float(exact_ratio((1, s), (1, s / (1 - s)))), s) for s in (Fraction(k, 300) for k in range(1, 300))
    )
    assert best[1] == Fraction(1, 3)
    assert best[0] == pytest.approx(32 / 27, rel=1e-12)
    r = arithmetic_bound((1, 1 / 3), (1, 0.5))
    assert r.ratio == pytest.approx(32 / 27, rel=1e-12)


def test_geometric_chain_approaches_four_thirds():
    # q = 1/2 closed form: sum a = 2 - 2^(1-n), sum b = 3 - 2^(2-n).
    for n in (2, 5, 10, 40):
        ch = geometric_extremal_chain(n)
        assert validate_chain(ch.a, ch.b).valid
        expected = (2 - 2.0 ** (1 - n)) ** 2 / (3 - 2.0 ** (2 - n))
        assert arithmetic_bound(ch.a, ch.b).ratio == pytest.approx(expected, rel=1e-12)
    assert arithmetic_bound(*vars(geometric_extremal_chain(60)).values()).ratio == pytest.approx(BOUND, rel=1e-12)
    assert arithmetic_bound(*vars(geometric_extremal_chain(3)).values()).ratio > 1.1


def test_random_chain_deterministic():
    assert random_chain(3, 10) == random_chain(3, 10)
    assert random_chain(3, 10) != random_chain(4, 10)
    ch = random_chain(0, 1)
    assert ch.a == ch.b


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 64))
def test_generator_outputs_satisfy_bound(seed, n):
    ch = random_chain(seed, n)
    assert validate_chain(ch.a, ch.b).valid
    r = arithmetic_bound(ch.a, ch.b)
    assert r.verdict
    assert r.ratio == pytest.approx(float(exact_ratio(ch.a, ch.b)), rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=12))
def test_equality_chains_satisfy_bound(b):
    # Chains saturating every constraint are the hardest case for the bound.
    a = [b[0]]
    for bi in b[1:]:
        a.append(harmonic_sum((a[-1], bi)))
    assert arithmetic_bound(a, b).ratio <= BOUND


def test_fuzz_small_run():
    res = fuzz(1000, seed=0, n_max=32)
    assert res.samples == 1000
    assert not res.failures
    assert 1.0 <= res.max_ratio <= BOUND
    assert fuzz(1000, seed=0, n_max=32) == res
