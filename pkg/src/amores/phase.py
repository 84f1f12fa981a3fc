"""Nested-interval construction of a phase with a prescribed phase resonance.

Starting from an anchor ``k_0`` with ``(-k_0 alpha) mod 1`` in ``[1/10, 1/5]``
the resonance sites are pushed forward along one parity of denominators and
each site pins ``2 theta`` into a short interval just beside ``(-k_j alpha) mod 1``:

    Case1:  k_{j+1} = k_j + floor(eta q_{2j+1}/q_{2j}) q_{2j},
            -10 eta/q_{2j} <= 2 theta - x_j <= -eta/(10 q_{2j})
    Case2:  k_{j+1} = k_j + floor(eta q_{2j}/q_{2j-1}) q_{2j-1},
            eta/(10 q_{2j-1}) <= 2 theta - x_j <= 10 eta/q_{2j-1}

with ``x_j = (-k_j alpha) mod 1``. Since ``alpha`` is only known through an
enclosure, every interval is shrunk so that membership is certified.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .contfrac import ConvergentTable
from .dioph import AlphaEnclosure, Interval
from .errors import ConstructionError, PrecisionError, SearchError, ValidationError

log = logging.getLogger(__name__)

CASES = ("Case1", "Case2")
ETA_MAX = Fraction(1, 100)
STRICT_FACTOR = Fraction(10**18)
RELAXED_FACTOR = Fraction(40)
ANCHOR_WINDOW = (Fraction(1, 10), Fraction(1, 5))


def _frac_part_interval(lo: Fraction, hi: Fraction) -> Interval:
    """Reduce ``[lo, hi]`` mod 1; the result must sit inside one unit cell."""
    f = math.floor(lo)
    if math.floor(hi) != f and hi != f + 1:
        raise PrecisionError("orbit point enclosure straddles an integer; deepen the alpha enclosure")
    return lo - f, hi - f


def orbit_enclosure(k: int, alpha: AlphaEnclosure) -> Interval:
    """Certified enclosure of ``(-k alpha) mod 1``."""
    if k >= 0:
        return _frac_part_interval(-k * alpha.hi, -k * alpha.lo)
    return _frac_part_interval(-k * alpha.lo, -k * alpha.hi)


def find_anchor_k0(alpha: AlphaEnclosure, search_cap: int = 10**6) -> int:
    """Smallest ``k >= 1`` whose orbit point certifiably lies in ``[1/10, 1/5]``."""
    if search_cap < 1:
        raise ValidationError("search_cap must be >= 1")
    a, b = ANCHOR_WINDOW
    for k in range(1, search_cap + 1):
        lo, hi = orbit_enclosure(k, alpha)
        if a <= lo and hi <= b:
            return k
        if lo <= b and hi >= a:
            # overlaps the window without being inside it
            raise PrecisionError(
                f"orbit point of k = {k} straddles the anchor window; deepen the alpha enclosure")
    raise SearchError(f"no anchor k_0 <= {search_cap}")


def _log_ratio(table: ConvergentTable, num_idx: int, den_idx: int) -> float:
    return math.log(table.q(num_idx)) / table.q(den_idx)


def case_surrogates(table: ConvergentTable) -> tuple[float, float]:
    """Finite-depth ``max_j ln q_{2j}/q_{2j-1}`` and ``max_j ln q_{2j+1}/q_{2j}`` over ``j >= 1``."""
    even = [_log_ratio(table, 2 * j, 2 * j - 1) for j in range(1, table.depth // 2 + 1)]
    odd = [_log_ratio(table, 2 * j + 1, 2 * j) for j in range(1, (table.depth - 1) // 2 + 1)]
    return max(even, default=-math.inf), max(odd, default=-math.inf)


def select_case(table: ConvergentTable) -> str:
    """``Case1`` when even-indexed denominators jump hardest, else ``Case2``; ties go to Case1."""
    if table.depth < 2:
        raise ValidationError("select_case needs depth >= 2")
    s1, s2 = case_surrogates(table)
    return "Case1" if s1 >= s2 else "Case2"


def _indices(case: str, j: int) -> tuple[int, int]:
    """``(m, step_num)``: the interval scale ``q_m`` and the numerator index of the step."""
    if case == "Case1":
        return 2 * j, 2 * j + 1
    return 2 * j - 1, 2 * j


def auto_j0(table: ConvergentTable, case: str, threshold: Fraction) -> int:
    """Smallest ``j >= 1`` such that every quotient from the step index on clears ``threshold``."""
    for j in range(1, table.depth + 1):
        _, first = _indices(case, j)
        if first > table.depth:
            break
        if all(table.a(i) >= threshold for i in range(first, table.depth + 1)):
            return j
    raise ValidationError(
        f"no j0: partial quotients never stay above {float(threshold):.3g} through depth {table.depth}")


@dataclass(frozen=True)
class PhaseConstructionState:
    case_tag: str
    eta: Fraction
    j0: int
    k_seq: tuple[int, ...]
    intervals: tuple[Interval, ...]
    orbit: tuple[Interval, ...]
    theta: Interval
    relaxed: bool = False
    alpha_depth: int | None = None
    notes: tuple[str, ...] = field(default=(), compare=False)

    @property
    def J(self) -> int:
        return len(self.k_seq)

    @property
    def j_values(self) -> range:
        return range(self.j0, self.j0 + len(self.k_seq))

    def k(self, j: int) -> int:
        return self.k_seq[j - self.j0]

    def interval(self, j: int) -> Interval:
        return self.intervals[j - self.j0]

    @property
    def midpoint(self) -> Fraction:
        return (self.theta[0] + self.theta[1]) / 2

    @property
    def half_width(self) -> Fraction:
        return (self.theta[1] - self.theta[0]) / 2

    def scale_index(self, j: int) -> int:
        return _indices(self.case_tag, j)[0]

    def to_dict(self) -> dict:
        rat = lambda x: f"{x.numerator}/{x.denominator}"
        return {
            "case": self.case_tag,
            "eta": rat(self.eta),
            "j0": self.j0,
            "relaxed": self.relaxed,
            "alpha_depth": self.alpha_depth,
            "k_seq": [str(k) for k in self.k_seq],
            "intervals": [[rat(a), rat(b)] for a, b in self.intervals],
            "orbit": [[rat(a), rat(b)] for a, b in self.orbit],
            "theta": [rat(self.theta[0]), rat(self.theta[1])],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseConstructionState":
        pair = lambda p: (Fraction(p[0]), Fraction(p[1]))
        return cls(
            case_tag=d["case"], eta=Fraction(d["eta"]), j0=int(d["j0"]),
            k_seq=tuple(int(k) for k in d["k_seq"]),
            intervals=tuple(pair(p) for p in d["intervals"]),
            orbit=tuple(pair(p) for p in d["orbit"]),
            theta=pair(d["theta"]), relaxed=bool(d.get("relaxed", False)),
            alpha_depth=d.get("alpha_depth"), notes=tuple(d.get("notes", ())))


def certified_interval(case: str, eta: Fraction, q: int, x: Interval) -> Interval:
    """Largest theta-interval certainly inside ``I_j`` given ``x_j`` in ``[x_lo, x_hi]``."""
    x_lo, x_hi = x
    if case == "Case1":
        lo2, hi2 = x_hi - 10 * eta / q, x_lo - eta / (10 * q)
    else:
        lo2, hi2 = x_hi + eta / (10 * q), x_lo + 10 * eta / q
    lo, hi = max(lo2 / 2, Fraction(0)), min(hi2 / 2, Fraction(1, 2))
    if lo > hi:
        raise PrecisionError("certified interval is empty; deepen the alpha enclosure")
    return lo, hi


def construct_theta(table: ConvergentTable, eta: Fraction | str, J: int,
                    relaxed: bool = False, anchor_cap: int = 10**6,
                    case: str | None = None, j0: int | None = None,
                    threshold: Fraction | None = None,
                    alpha: AlphaEnclosure | None = None) -> PhaseConstructionState:
    """Build ``k_{j0} .. k_{j0+J-1}`` and the nested intervals, returning the last one as theta."""
    eta = Fraction(eta)
    notes = []
    if not 0 < eta:
        raise ValidationError("eta must be positive")
    if eta > ETA_MAX:
        if not relaxed:
            raise ValidationError(f"eta = {eta} exceeds 1/100; pass relaxed=True to override")
        msg = f"eta = {eta} above 1/100 (relaxed mode)"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    if J < 1:
        raise ValidationError("J must be >= 1")
    case = case or select_case(table)
    if case not in CASES:
        raise ValidationError(f"unknown case {case!r}")
    if threshold is None:
        threshold = (RELAXED_FACTOR if relaxed else STRICT_FACTOR) / eta
    if j0 is None:
        j0 = auto_j0(table, case, threshold)
    else:
        _, first = _indices(case, j0)
        low = [i for i in range(first, table.depth + 1) if table.a(i) < threshold]
        if low:
            msg = f"explicit j0 = {j0}: a_n below {float(threshold):.3g} at n = {low[:5]}"
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
    j_last = j0 + J - 1
    m_last, _ = _indices(case, j_last)
    if table.depth < m_last + 1:
        raise ValidationError(f"table depth {table.depth} < {m_last + 1} needed for J = {J}")
    alpha = alpha or AlphaEnclosure.from_table(table)

    k = find_anchor_k0(alpha, anchor_cap)
    k_seq, intervals, orbit = [], [], []
    for j in range(j0, j_last + 1):
        m, step_num = _indices(case, j)
        q = table.q(m)
        x = orbit_enclosure(k, alpha)
        iv = certified_interval(case, eta, q, x)
        if intervals:
            lo_prev, hi_prev = intervals[-1]
            if iv[0] < lo_prev or iv[1] > hi_prev:
                gap = max(lo_prev - iv[0], iv[1] - hi_prev)
                raise ConstructionError(
                    f"I_{j} is not inside I_{j - 1} (overhang {float(gap):.3e})", j=j, gap=gap)
        k_seq.append(k)
        intervals.append(iv)
        orbit.append(x)
        log.debug("j=%d k=%d I=[%s, %s]", j, k, float(iv[0]), float(iv[1]))
        k += math.floor(eta * table.q(step_num) / q) * q

    return PhaseConstructionState(
        case_tag=case, eta=eta, j0=j0, k_seq=tuple(k_seq), intervals=tuple(intervals),
        orbit=tuple(orbit), theta=intervals[-1], relaxed=relaxed,
        alpha_depth=alpha.depth, notes=tuple(notes))


def interval_length_defect(state: PhaseConstructionState, table: ConvergentTable, j: int) -> Fraction:
    """``|I_j| + width(x_j)/2 - (10 eta - eta/10)/(2 q)``; zero unless clipping to [0, 1/2] occurred."""
    lo, hi = state.interval(j)
    x_lo, x_hi = state.orbit[j - state.j0]
    q = table.q(state.scale_index(j))
    eta = state.eta
    return (hi - lo) + (x_hi - x_lo) / 2 - (10 * eta - eta / 10) / (2 * q)


@dataclass(frozen=True)
class DeltaRow:
    j: int
    k: int
    value: float          # ln q_m / k_j
    lo: float
    hi: float
    beta_over_eta: float  # ln q_m / (eta q_{m-1})
    eq410_gap: int        # |k_j - eta q_{m-1}| rounded down
    eq410_ok: bool


@dataclass(frozen=True)
class ConstructionDelta:
    rows: tuple[DeltaRow, ...]
    beta_hat: float
    eta: Fraction

    @property
    def delta(self) -> float:
        return max(r.value for r in self.rows)

    @property
    def bracket(self) -> tuple[float, float]:
        return max(r.lo for r in self.rows), max(r.hi for r in self.rows)

    @property
    def ratio(self) -> float:
        """``delta / (beta / eta)``; tends to 1 when the construction is in its regime."""
        return self.delta / (self.beta_hat / float(self.eta))


def delta_of_construction(state: PhaseConstructionState, table: ConvergentTable,
                          skip_anchor: bool = False) -> ConstructionDelta:
    """Per-site ``ln q_m / k_j`` with ``m = 2j`` (Case1) or ``2j-1`` (Case2)."""
    rows = []
    for j in state.j_values:
        if skip_anchor and j == state.j0 and state.J > 1:
            continue
        k = state.k(j)
        m = state.scale_index(j)
        q, q_prev, q_prev2 = table.q(m), table.q(m - 1), table.q(m - 2) if m >= 1 else 0
        lq = math.log(q)
        v = lq / k
        slack = 8 * math.ulp(max(v, 1.0))
        gap_exact = abs(k - state.eta * q_prev)
        rows.append(DeltaRow(
            j, k, v, v - slack, v + slack, lq / (float(state.eta) * q_prev),
            math.floor(gap_exact), gap_exact <= 100 * q_prev2))
    from .dioph import beta_hat
    b = beta_hat(table).estimate if table.depth >= 2 else math.nan
    return ConstructionDelta(tuple(rows), b, state.eta)


def theta_points(state: PhaseConstructionState) -> Iterable[Fraction]:
    """Endpoints and midpoint of the final enclosure."""
    lo, hi = state.theta
    return lo, (lo + hi) / 2, hi
