"""Harmonic sums and the chain inequality (sum a)^2 <= 4/3 * b1 * sum b."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

BOUND = 4.0 / 3.0
CHAIN_SLACK = 1e-12
FIRST_TERM_RTOL = 1e-9


def harmonic_sum(values: Iterable[float]) -> float:
    """``x1 (+) x2 (+) ... = 1 / (1/x1 + 1/x2 + ...)``; ``inf`` is the identity."""
    vals = list(values)
    if not vals:
        raise InputError("harmonic_sum of an empty list")
    total = 0.0
    for x in vals:
        x = float(x)
        if math.isnan(x) or x <= 0:
            raise InputError(f"harmonic_sum needs positive entries, got {x!r}")
        if not math.isinf(x):
            total += 1.0 / x
    return math.inf if total == 0.0 else 1.0 / total


@dataclass(frozen=True)
class ChainPair:
    a: tuple[float, ...]
    b: tuple[float, ...]


@dataclass(frozen=True)
class ChainVerdict:
    valid: bool
    index: int | None = None  # 1-based index of the first violated condition
    reason: str = ""


def validate_chain(a: Sequence[float], b: Sequence[float]) -> ChainVerdict:
    """Check ``a1 = b1``, positivity and ``a[i+1] <= a[i] (+) b[i+1]``."""
    if len(a) != len(b):
        raise InputError(f"chain lengths differ: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise InputError("chain must have at least one term")
    for i, (x, y) in enumerate(zip(a, b), start=1):
        if not (x > 0 and y > 0) or math.isinf(x) or math.isinf(y):
            return ChainVerdict(False, i, "entries must be finite and positive")
    if not math.isclose(a[0], b[0], rel_tol=FIRST_TERM_RTOL):
        return ChainVerdict(False, 1, "a1 != b1")
    for i in range(len(a) - 1):
        limit = harmonic_sum((a[i], b[i + 1]))
        if a[i + 1] > limit + CHAIN_SLACK:
            return ChainVerdict(False, i + 2, f"a[{i + 2}] = {a[i + 1]:.6g} > a[{i + 1}] (+) b[{i + 2}] = {limit:.6g}")
    return ChainVerdict(True)


@dataclass(frozen=True)
class BoundResult:
    ratio: float
    verdict: bool
    sum_a: float
    sum_b: float


def arithmetic_bound(a: Sequence[float], b: Sequence[float]) -> BoundResult:
    """Ratio ``(sum a)^2 / (b1 * sum b)`` of a valid chain and whether it is <= 4/3."""
    check = validate_chain(a, b)
    if not check.valid:
        raise InputError(f"invalid chain at index {check.index}: {check.reason}")
    sa = math.fsum(a)
    sb = math.fsum(b)
    ratio = sa * sa / (b[0] * sb)
    return BoundResult(ratio=ratio, verdict=ratio <= BOUND, sum_a=sa, sum_b=sb)


def random_chain(
    seed: int,
    n: int,
    decay_range: tuple[float, float] = (0.0, 1.0),
    b_range: tuple[float, float] = (1e-2, 1e2),
) -> ChainPair:
    """Deterministic valid chain of length ``n``.

    ``b`` is log-uniform on ``b_range``; ``a1 = b1`` and
    ``a[i+1] = theta * (a[i] (+) b[i+1])`` with ``theta`` uniform on
    ``decay_range`` (exclusive of the lower end, inclusive of the upper).
    """
    if n < 1:
        raise InputError("chain length must be >= 1")
    lo, hi = decay_range
    if not (0.0 <= lo < hi <= 1.0):
        raise InputError("decay_range must satisfy 0 <= lo < hi <= 1")
    rng = np.random.default_rng(seed)
    b = np.exp(rng.uniform(math.log(b_range[0]), math.log(b_range[1]), size=n))
    # uniform on (lo, hi]
    theta = hi - (hi - lo) * rng.random(size=max(n - 1, 0))
    a = [float(b[0])]
    for i in range(n - 1):
        a.append(float(theta[i]) * harmonic_sum((a[i], float(b[i + 1]))))
    return ChainPair(tuple(a), tuple(float(x) for x in b))


def geometric_extremal_chain(n: int, q: float = 0.5) -> ChainPair:
    """Equality chain with ``a[i] = q**(i-1)``; ``q = 1/2`` drives the ratio to 4/3."""
    a = [q**i for i in range(n)]
    b = [a[0]] + [a[i] * a[i - 1] / (a[i - 1] - a[i]) for i in range(1, n)]
    return ChainPair(tuple(a), tuple(b))


@dataclass(frozen=True)
class FuzzResult:
    samples: int
    max_ratio: float
    argmax_seed: int
    failures: tuple[int, ...]


def fuzz(count: int, seed: int = 0, n_max: int = 64, decay_range=(0.0, 1.0)) -> FuzzResult:
    """Check the bound on ``count`` random chains with seeds ``seed .. seed+count-1``.

    Chain lengths cycle through ``1 .. n_max`` so every length is exercised.
    """
    best, arg = -math.inf, seed
    failures = []
    for s in range(seed, seed + count):
        n = 1 + (s - seed) % n_max
        ch = random_chain(s, n, decay_range)
        res = arithmetic_bound(ch.a, ch.b)
        if not res.verdict:
            failures.append(s)
        if res.ratio > best:
            best, arg = res.ratio, s
    return FuzzResult(samples=count, max_ratio=best, argmax_seed=arg, failures=tuple(failures))
