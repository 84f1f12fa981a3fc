"""Exact torus distances, finite-depth beta/delta estimators and the
small-denominator verifier for the constructed phase.

Everything in a verdict path is exact rational (or scaled-integer) arithmetic.
Floating point only appears in the logarithmic estimates, which are widened by
a few ulps to give brackets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

from .contfrac import ConvergentTable
from .errors import DomainError, PrecisionError

if TYPE_CHECKING:
    from .phase import PhaseConstructionState

Interval = tuple[Fraction, Fraction]

DEFAULT_CAP = 100_000


def torus_norm(x: Fraction | int) -> Fraction:
    """``||x||_{R/Z}`` for rational ``x``."""
    x = Fraction(x)
    r = x - math.floor(x)
    return min(r, 1 - r)


def torus_norm_interval(lo: Fraction, hi: Fraction) -> Interval:
    """Certified ``[min, max]`` of ``||x||`` over ``x in [lo, hi]``.

    The distance to Z is piecewise linear with minima on Z and maxima on Z + 1/2,
    so the extremes sit at an endpoint unless such a point lies inside.
    """
    if hi < lo:
        raise DomainError("empty interval")
    if hi - lo >= Fraction(1, 2):
        raise PrecisionError("interval too wide for a torus-distance bound")
    d_lo_end, d_hi_end = torus_norm(lo), torus_norm(hi)
    d_min, d_max = min(d_lo_end, d_hi_end), max(d_lo_end, d_hi_end)
    if math.floor(hi) > math.floor(lo) or lo == math.floor(lo):
        d_min = Fraction(0)
    if math.floor(hi - Fraction(1, 2)) > math.floor(lo - Fraction(1, 2)):
        d_max = Fraction(1, 2)
    return d_min, d_max


@dataclass(frozen=True)
class AlphaEnclosure:
    """``lo < alpha < hi`` with exact rational endpoints.

    Built from a table, ``lo = p_{2m}/q_{2m}`` and ``hi = p_{2m+1}/q_{2m+1}``;
    any tail of the expansion keeps alpha in between.
    """

    lo: Fraction
    hi: Fraction
    depth: int | None = None

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError("alpha enclosure must satisfy lo < hi")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @classmethod
    def from_table(cls, table: ConvergentTable, depth: int | None = None) -> "AlphaEnclosure":
        """Use the even index ``depth`` (default: deepest pair available)."""
        if depth is None:
            depth = table.depth - 1 if (table.depth - 1) % 2 == 0 else table.depth - 2
        if depth < 0 or depth % 2 or depth + 1 > table.depth:
            raise DomainError(f"no convergent pair (2m, 2m+1) at 2m = {depth}")
        return cls(table.convergent(depth), table.convergent(depth + 1), depth)

    def contains(self, other: "AlphaEnclosure") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


def _as_interval(x) -> Interval:
    if isinstance(x, tuple):
        return Fraction(x[0]), Fraction(x[1])
    x = Fraction(x)
    return x, x


def torus_norm_enclosed(k: int, alpha: AlphaEnclosure, offset=Fraction(0)) -> Interval:
    """Certified bounds on ``||offset + k alpha||``; ``offset`` may be an interval."""
    if abs(k) * alpha.width >= Fraction(1, 4):
        raise PrecisionError(
            f"|k| * width = {float(abs(k) * alpha.width):.3g} >= 1/4; deepen the alpha enclosure")
    o_lo, o_hi = _as_interval(offset)
    a, b = (alpha.lo, alpha.hi) if k >= 0 else (alpha.hi, alpha.lo)
    return torus_norm_interval(o_lo + k * a, o_hi + k * b)


# -- beta / delta estimates --------------------------------------------------

def _log_bracket(num: int, den: int) -> tuple[float, float, float]:
    """``ln(num/den)`` with a few-ulp bracket; works for huge integers."""
    v = math.log(num) - math.log(den)
    slack = 8 * math.ulp(max(abs(math.log(num)), abs(math.log(den)), 1.0))
    return v, v - slack, v + slack


@dataclass(frozen=True)
class BetaRow:
    n: int
    value: float
    lo: float
    hi: float


@dataclass(frozen=True)
class BetaEstimate:
    rows: tuple[BetaRow, ...]

    @property
    def estimate(self) -> float:
        """Running max of ``ln q_{n+1} / q_n`` over the table."""
        return max(r.value for r in self.rows)

    def running_max(self) -> list[float]:
        return list(itertools.accumulate((r.value for r in self.rows), max))

    def at(self, n: int) -> BetaRow:
        return self.rows[n - self.rows[0].n]


def beta_n(table: ConvergentTable, n: int) -> float:
    return math.log(table.q(n + 1)) / table.q(n)


def beta_hat(table: ConvergentTable) -> BetaEstimate:
    """``beta_n = ln q_{n+1} / q_n`` for ``n = 1 .. depth-1``."""
    if table.depth < 2:
        raise DomainError("beta_hat needs depth >= 2")
    rows = []
    for n in range(1, table.depth):
        q_next, q = table.q(n + 1), table.q(n)
        v, lo, hi = _log_bracket(q_next, 1)
        rows.append(BetaRow(n, v / q, lo / q * (1 - 1e-15), hi / q * (1 + 1e-15)))
    return BetaEstimate(tuple(rows))


def _neg_log(d: Fraction) -> float:
    if d == 0:
        return math.inf
    return -(math.log(d.numerator) - math.log(d.denominator))


@dataclass(frozen=True)
class DeltaEstimate:
    """Finite-depth bracket on ``max_k -ln||2 theta + k alpha|| / |k|``."""

    lower: float
    upper: float
    K: int
    witnesses: tuple[int, ...]
    per_k: dict = field(default_factory=dict, compare=False, repr=False)


def delta_hat(alpha: AlphaEnclosure, theta, K: int,
              candidates: Iterable[int] = ()) -> DeltaEstimate:
    """Estimate ``delta(alpha, theta)`` over ``1 <= |k| <= K`` plus ``candidates``.

    ``witnesses`` are the record-setting ``|k|`` of the running maximum of the
    lower bracket, in increasing order; the last one is the argmax.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    t_lo, t_hi = _as_interval(theta)
    ks = sorted(set(range(1, K + 1)) | {abs(int(c)) for c in candidates if c})
    lower = upper = -math.inf
    witnesses = []
    per_k = {}
    for k in ks:
        lo_pair = hi_pair = None
        for kk in (k, -k):
            d_lo, d_hi = torus_norm_enclosed(kk, alpha, (2 * t_lo, 2 * t_hi))
            v_lo, v_hi = _neg_log(d_hi) / k, _neg_log(d_lo) / k
            lo_pair = v_lo if lo_pair is None else max(lo_pair, v_lo)
            hi_pair = v_hi if hi_pair is None else max(hi_pair, v_hi)
        per_k[k] = (lo_pair, hi_pair)
        if lo_pair > lower:
            witnesses.append(k)
        lower = max(lower, lo_pair)
        upper = max(upper, hi_pair)
    # widen the float logs by a relative ulp-scale margin
    return DeltaEstimate(lower * (1 - 1e-12), upper * (1 + 1e-12), K, tuple(witnesses), per_k)


# -- small-denominator verifier ---------------------------------------------

class _ScaledTorus:
    """Evaluates ``||offset + k alpha||`` bounds with integers over one denominator."""

    def __init__(self, alpha: AlphaEnclosure, offset: Interval):
        o_lo, o_hi = offset
        M = math.lcm(alpha.lo.denominator, alpha.hi.denominator,
                     o_lo.denominator, o_hi.denominator)
        self.M = M
        self.a_lo = alpha.lo.numerator * (M // alpha.lo.denominator)
        self.a_hi = alpha.hi.numerator * (M // alpha.hi.denominator)
        self.o_lo = o_lo.numerator * (M // o_lo.denominator)
        self.o_hi = o_hi.numerator * (M // o_hi.denominator)

    def bounds(self, k: int) -> tuple[int, int]:
        """Scaled ``(d_lo, d_hi)``; true distances are these over ``M``."""
        M = self.M
        if k >= 0:
            lo, hi = self.o_lo + k * self.a_lo, self.o_hi + k * self.a_hi
        else:
            lo, hi = self.o_lo + k * self.a_hi, self.o_hi + k * self.a_lo
        if 4 * (hi - lo) >= M:
            raise PrecisionError(f"enclosure too wide at k = {k}; deepen the alpha enclosure")
        fl, fh = lo // M, hi // M
        rl, rh = lo - fl * M, hi - fh * M
        dl, dh = min(rl, M - rl), min(rh, M - rh)
        d_min, d_max = min(dl, dh), max(dl, dh)
        if fh > fl or rl == 0:
            d_min = 0
        # a half-integer inside: the max is 1/2, which beats every bound we test
        if (2 * hi - M) // (2 * M) > (2 * lo - M) // (2 * M):
            d_max = M
        return d_min, d_max


@dataclass(frozen=True)
class Violation:
    k: int
    d_lo: Fraction
    d_hi: Fraction
    bound: Fraction


@dataclass
class ResonanceReport:
    item: str
    index: int
    tested_count: int
    bound: Fraction
    violations: list[Violation] = field(default_factory=list)
    min_ratio: Fraction | None = None  # min certified d_lo / bound
    argmin_k: int | None = None
    ranges: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def _signed_range(limit: int, zero: bool) -> list[int]:
    """Boundary-first ordering of ``l`` with ``|l| <= limit``."""
    return [l for l in range(-limit, limit + 1) if zero or l != 0]


def enumerate_pairs(l1_limit: int, l1_min: int, l2_values: tuple[int, int] | None,
                    cap: int) -> Iterator[tuple[int, int]]:
    """Deterministic capped enumeration of ``(l1, l2)``.

    Boundary values first (``l1`` at both range ends and at ``+-l1_min``,
    ``l2`` at its range ends), then ``l1`` by increasing ``|l1|`` (negative
    first) with ``l2`` ascending, until ``cap`` pairs have been produced.
    ``l2_values`` is ``(first, last)`` inclusive, or ``None`` for ``l2 = 0``.
    """
    if l1_limit < l1_min:
        return
    l2_ends = [0] if l2_values is None else sorted({l2_values[0], l2_values[1]})
    if l2_values is not None and l2_values[1] < l2_values[0]:
        return
    seen = set()
    count = 0

    def emit(pair):
        nonlocal count
        if pair in seen or count >= cap:
            return False
        seen.add(pair)
        count += 1
        return True

    boundary_l1 = [-l1_limit, l1_limit, -l1_min, l1_min]
    for l1 in boundary_l1:
        if abs(l1) < l1_min:
            continue
        for l2 in l2_ends:
            if emit((l1, l2)):
                yield (l1, l2)
    for mag in range(l1_min, l1_limit + 1):
        for l1 in ((-mag, mag) if mag else (0,)):
            l2_iter = [0] if l2_values is None else range(l2_values[0], l2_values[1] + 1)
            for l2 in l2_iter:
                if count >= cap:
                    return
                if emit((l1, l2)):
                    yield (l1, l2)


def _check_clause(item: str, index: int, scaled: _ScaledTorus, k_of, pairs,
                  bound: Fraction, ranges: dict) -> ResonanceReport:
    """Pure fold over the enumerated pairs; chunks of it could be merged in any order."""
    M = scaled.M
    bn, bd = bound.numerator, bound.denominator
    report = ResonanceReport(item, index, 0, bound, ranges=ranges)
    best = None
    for l1, l2 in pairs:
        k = k_of(l1, l2)
        d_lo, d_hi = scaled.bounds(k)
        report.tested_count += 1
        # exact comparisons d/M against bn/bd
        if d_lo * bd >= bn * M:
            pass
        elif d_hi * bd < bn * M:
            report.violations.append(
                Violation(k, Fraction(d_lo, M), Fraction(min(d_hi, M // 2), M), bound))
        else:
            raise PrecisionError(
                f"clause {item}: k = {k} straddles the bound; deepen the alpha enclosure")
        if best is None or d_lo < best[0]:
            best = (d_lo, k)
    if best is not None:
        report.min_ratio = Fraction(best[0], M) / bound
        report.argmin_k = best[1]
    return report


def verify_clause5(table: ConvergentTable, alpha: AlphaEnclosure, n: int,
                   cap: int = DEFAULT_CAP) -> ResonanceReport:
    """``||k alpha|| >= 1/(4 q_n)`` for ``k = l1 q_n + l2``, ``|l1| <= q_{n+1}/(10 q_n)``, ``1 <= l2 < q_n``."""
    q_n, q_next = table.q(n), table.q(n + 1)
    l1_limit = q_next // (10 * q_n)
    ranges = {"l1": [-l1_limit, l1_limit], "l2": [1, q_n - 1]}
    scaled = _ScaledTorus(alpha, (Fraction(0), Fraction(0)))
    pairs = enumerate_pairs(l1_limit, 0, (1, q_n - 1), cap)
    return _check_clause("P5", n, scaled, lambda l1, l2: l1 * q_n + l2, pairs,
                         Fraction(1, 4 * q_n), ranges)


def _phase_indices(case_tag: str, j: int) -> tuple[int, int, int]:
    """``(n_prev, n_cur, n_next)`` playing the roles of ``(2j-1, 2j, 2j+1)``."""
    if case_tag == "Case1":
        return 2 * j - 1, 2 * j, 2 * j + 1
    return 2 * j - 2, 2 * j - 1, 2 * j


def verify_prop41(table: ConvergentTable, phase: "PhaseConstructionState", j: int,
                  cap: int = DEFAULT_CAP, alpha: AlphaEnclosure | None = None,
                  clauses: Sequence[str] = ("P1", "P2", "P3", "P4", "P5")
                  ) -> list[ResonanceReport]:
    """Check the five small-denominator clauses at index ``j`` by capped enumeration.

    For Case 2 the indices are shifted down by one (``2j -> 2j-1`` etc.).
    """
    if j not in phase.j_values:
        raise DomainError(f"j = {j} outside the constructed range {list(phase.j_values)}")
    n_prev, n_cur, n_next = _phase_indices(phase.case_tag, j)
    if n_next > table.depth:
        raise DomainError(f"table depth {table.depth} < {n_next} needed at j = {j}")
    alpha = alpha or AlphaEnclosure.from_table(table)
    eta = phase.eta
    k_j = phase.k(j)
    t_lo, t_hi = phase.theta
    scaled = _ScaledTorus(alpha, (2 * t_lo, 2 * t_hi))
    q_prev, q_cur, q_next = table.q(n_prev), table.q(n_cur), table.q(n_next)
    reports = []

    if "P1" in clauses:
        lim = q_cur // 10
        reports.append(_check_clause(
            "P1", j, scaled, lambda l1, l2: k_j + l1 * q_prev,
            enumerate_pairs(lim, 1, None, cap), Fraction(1, 4 * q_cur),
            {"l1": [-lim, lim]}))
    if "P2" in clauses:
        lim = q_cur // (10 * q_prev)
        reports.append(_check_clause(
            "P2", j, scaled, lambda l1, l2: k_j + l1 * q_prev + l2,
            enumerate_pairs(lim, 0, (1, q_prev - 1), cap), Fraction(1, 4 * q_prev),
            {"l1": [-lim, lim], "l2": [1, q_prev - 1]}))
    if "P3" in clauses:
        lim = math.floor(eta * q_next / (30 * q_cur))
        reports.append(_check_clause(
            "P3", j, scaled, lambda l1, l2: k_j + l1 * q_cur,
            enumerate_pairs(lim, 0, None, cap), eta / (20 * q_cur),
            {"l1": [-lim, lim]}))
    if "P4" in clauses:
        lim = math.floor(10 * eta * q_next / q_cur)
        reports.append(_check_clause(
            "P4", j, scaled, lambda l1, l2: k_j + l1 * q_cur + l2,
            enumerate_pairs(lim, 0, (1, q_cur - 1), cap), Fraction(1, 4 * q_cur),
            {"l1": [-lim, lim], "l2": [1, q_cur - 1]}))
    if "P5" in clauses:
        reports.append(verify_clause5(table, alpha, n_cur, cap))
    return reports
