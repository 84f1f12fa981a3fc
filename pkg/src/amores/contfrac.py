"""Continued fractions with arbitrary-precision convergents.

Conventions: ``alpha = [a0; a1, a2, ...]`` and the convergent table is seeded
with ``p_{-1} = 1, q_{-1} = 0, p_0 = a0, q_0 = 1`` so that

    q_n = a_n q_{n-1} + q_{n-2},   p_n = a_n p_{n-1} + p_{n-2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from mpmath import iv
from mpmath.libmp import round_floor, to_int

from .errors import DomainError, PrecisionError, ResourceError, ValidationError

#: default cap on the bit length of any q_n
DEFAULT_BIT_BUDGET = 2**20

QuotientRule = Callable[[int, int], int]


@dataclass(frozen=True)
class PartialQuotients:
    a0: int = 0
    quotients: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "quotients", tuple(int(a) for a in self.quotients))
        for n, a in enumerate(self.quotients, start=1):
            if a < 1:
                raise ValidationError(f"partial quotient a_{n} = {a} must be >= 1")

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def value(self) -> Fraction:
        """Exact value of the finite expansion."""
        x = Fraction(0)
        for a in reversed(self.quotients):
            x = 1 / (a + x)
        return self.a0 + x

    def extend(self, rule: QuotientRule, depth: int,
               bit_budget: int = DEFAULT_BIT_BUDGET) -> "PartialQuotients":
        """Append quotients from ``rule(n, q_{n-1})`` until ``depth`` is reached."""
        qs = list(self.quotients)
        q_prev2, q_prev = 0, 1
        for a in qs:
            q_prev2, q_prev = q_prev, a * q_prev + q_prev2
        for n in range(len(qs) + 1, depth + 1):
            a = int(rule(n, q_prev))
            if a < 1:
                raise ValidationError(f"rule produced a_{n} = {a} < 1")
            q_prev2, q_prev = q_prev, a * q_prev + q_prev2
            if q_prev.bit_length() > bit_budget:
                raise ResourceError(
                    f"q_{n} needs {q_prev.bit_length()} bits, over the budget of {bit_budget}")
            qs.append(a)
        return PartialQuotients(self.a0, tuple(qs))


@dataclass(frozen=True)
class ConvergentRow:
    n: int
    a: int
    p: int
    q: int


@dataclass(frozen=True)
class ConvergentTable:
    """Rows ``n = 0..depth`` of ``(n, a_n, p_n, q_n)``; row 0 holds ``a0``."""

    rows: tuple[ConvergentRow, ...]

    @property
    def depth(self) -> int:
        return self.rows[-1].n

    @property
    def a0(self) -> int:
        return self.rows[0].a

    def _row(self, n: int) -> ConvergentRow:
        if not 0 <= n <= self.depth:
            raise IndexError(f"convergent index {n} outside 0..{self.depth}")
        return self.rows[n]

    def q(self, n: int) -> int:
        return 0 if n == -1 else self._row(n).q

    def p(self, n: int) -> int:
        return 1 if n == -1 else self._row(n).p

    def a(self, n: int) -> int:
        return self._row(n).a

    def convergent(self, n: int) -> Fraction:
        return Fraction(self.p(n), self.q(n))

    @property
    def quotients(self) -> PartialQuotients:
        return PartialQuotients(self.a0, tuple(r.a for r in self.rows[1:]))

    def truncate(self, depth: int) -> "ConvergentTable":
        return ConvergentTable(self.rows[: depth + 1])

    def check_invariants(self) -> None:
        """Raise ``AssertionError`` if any recursion or identity fails exactly."""
        for r in self.rows[1:]:
            n = r.n
            assert r.q == r.a * self.q(n - 1) + self.q(n - 2), n
            assert r.p == r.a * self.p(n - 1) + self.p(n - 2), n
            assert math.gcd(r.p, r.q) == 1, n
            assert r.p * self.q(n - 1) - self.p(n - 1) * r.q == (-1) ** (n - 1), n
            if n >= 2:
                assert r.q > self.q(n - 1), n


def expand_rational(num: int, den: int) -> PartialQuotients:
    """Euclidean expansion of ``num/den`` in canonical form (last quotient >= 2)."""
    if den == 0:
        raise DomainError("zero denominator")
    if den < 0:
        num, den = -num, -den
    a0, r = divmod(num, den)
    quotients = []
    num, den = den, r
    while den:
        a, r = divmod(num, den)
        quotients.append(a)
        num, den = den, r
    return PartialQuotients(a0, tuple(quotients))


def convergents(pq: PartialQuotients) -> ConvergentTable:
    p_prev2, p_prev = 1, pq.a0
    q_prev2, q_prev = 0, 1
    rows = [ConvergentRow(0, pq.a0, pq.a0, 1)]
    for n, a in enumerate(pq.quotients, start=1):
        p_prev2, p_prev = p_prev, a * p_prev + p_prev2
        q_prev2, q_prev = q_prev, a * q_prev + q_prev2
        rows.append(ConvergentRow(n, a, p_prev, q_prev))
    return ConvergentTable(tuple(rows))


def table_from_quotients(quotients: Iterable[int], a0: int = 0) -> ConvergentTable:
    return convergents(PartialQuotients(a0, tuple(quotients)))


def golden_table(depth: int) -> ConvergentTable:
    """Prefix of ``(sqrt(5) - 1)/2 = [0; 1, 1, 1, ...]``."""
    return table_from_quotients([1] * depth)


# -- exact floor of exp ------------------------------------------------------

def exp_floor(x: Fraction | int, precision_bits: int = 64,
              max_precision_bits: int = 1 << 22) -> int:
    """Return ``floor(e**x)`` exactly for rational ``x > 0``.

    The exponential is enclosed with outward-rounded interval arithmetic and the
    working precision is doubled until both endpoints share the same floor.
    """
    x = Fraction(x)
    if x <= 0:
        raise DomainError("exp_floor needs x > 0")
    # enough bits to hold the integer part plus a guard
    prec = max(precision_bits, int(x * 1.4427) + 64)
    while prec <= max_precision_bits:
        saved = iv.prec
        iv.prec = prec
        try:
            e = iv.exp(iv.mpf(x.numerator) / x.denominator)
            lo_end, hi_end = e._mpi_
            lo, hi = to_int(lo_end, round_floor), to_int(hi_end, round_floor)
        finally:
            iv.prec = saved
        if lo == hi:
            return lo
        prec *= 2
    raise PrecisionError(
        f"floor(exp({x})) still ambiguous at {max_precision_bits} bits")


# -- quotient rules ----------------------------------------------------------

def const_rule(a: int) -> QuotientRule:
    a = int(a)
    if a < 1:
        raise ValidationError("constant quotient must be >= 1")
    return lambda n, q_prev: a


def list_rule(values: Sequence[int]) -> QuotientRule:
    values = tuple(int(v) for v in values)

    def rule(n: int, q_prev: int) -> int:
        if n > len(values):
            raise ValidationError(f"quotient list has only {len(values)} entries, a_{n} requested")
        return values[n - 1]
    return rule


def beta_seed(mu: Fraction) -> int:
    """Integer first quotient ``ceil(2/mu) + 10``."""
    return math.ceil(Fraction(2) / mu) + 10


def beta_rule(mu: Fraction | str, bit_budget: int = DEFAULT_BIT_BUDGET) -> QuotientRule:
    """``a_1 = ceil(2/mu) + 10`` and ``a_{n+1} = floor(exp(mu q_n))``."""
    mu = Fraction(mu)
    if mu <= 0:
        raise ValidationError("mu must be positive")

    def rule(n: int, q_prev: int) -> int:
        if n == 1:
            return beta_seed(mu)
        # exp(mu q) has about mu q / ln 2 bits; q_n adds q_{n-1}'s own length
        room = bit_budget - q_prev.bit_length()
        if room <= 0 or mu * q_prev > Fraction(room) * Fraction(math.log(2)):
            raise ResourceError(
                f"a_{n} = floor(exp(mu*q_{n - 1})) would exceed the bit budget of {bit_budget}")
        return exp_floor(mu * q_prev)
    return rule


def build_alpha_with_beta(mu: Fraction | str, depth: int,
                          bit_budget: int = DEFAULT_BIT_BUDGET
                          ) -> tuple[PartialQuotients, ConvergentTable]:
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    pq = PartialQuotients(0, ()).extend(beta_rule(mu, bit_budget), depth, bit_budget)
    return pq, convergents(pq)


def parse_rule(spec: str) -> QuotientRule:
    """Parse ``const:<a>``, ``beta:<mu>`` or ``list:<file-or-comma-list>``."""
    kind, _, arg = spec.partition(":")
    if kind == "const":
        return const_rule(int(arg))
    if kind == "beta":
        return beta_rule(Fraction(arg))
    if kind == "list":
        from pathlib import Path
        path = Path(arg)
        text = path.read_text() if path.is_file() else arg
        return list_rule([int(t) for t in text.replace(",", " ").split()])
    raise ValidationError(f"unknown quotient rule {spec!r}")


def build_table(rule: str | QuotientRule, depth: int, a0: int = 0,
                bit_budget: int = DEFAULT_BIT_BUDGET) -> ConvergentTable:
    if isinstance(rule, str):
        if rule.startswith("beta:"):
            return build_alpha_with_beta(Fraction(rule[5:]), depth, bit_budget)[1]
        rule = parse_rule(rule)
    return convergents(PartialQuotients(a0, ()).extend(rule, depth, bit_budget))
