"""Transfer matrices, box determinants, Green's function edges and Lagrange terms.

Conventions:

    A(theta)   = [[E - v(theta), -1], [1, 0]],   v(theta) = 2 lam cos 2 pi theta
    A_k(theta) = A(theta + (k-1) alpha) ... A(theta)
    P_k(theta) = det(E - H) on [0, k-1],  P_k = (E - v_{k-1}) P_{k-1} - P_{k-2}

so that A_k(theta) = [[P_k(theta), -P_{k-1}(theta+alpha)], [P_{k-1}(theta), -P_{k-2}(theta+alpha)]].

Two arithmetic back ends share the code: ``precision_bits == 53`` runs on
Python floats, anything larger on mpmath at that working precision. Products
are rescaled by exact powers of two every ``R`` steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np
from mpmath import mp

from .contfrac import ConvergentTable
from .errors import (ConditioningError, DegeneracyError, DomainError, NumericError,
                     ResourceError, ValidationError)

DEFAULT_R = 16
LN2 = math.log(2)


@dataclass(frozen=True)
class CocycleParams:
    lam: float
    E: float
    theta: Fraction
    alpha: Fraction
    alpha_err: Fraction = Fraction(0)
    theta_err: Fraction = Fraction(0)
    precision_bits: int = 53

    def __post_init__(self):
        object.__setattr__(self, "theta", Fraction(self.theta))
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if self.precision_bits < 53:
            raise ValidationError("precision_bits must be >= 53")

    @classmethod
    def from_table(cls, table: ConvergentTable, lam: float, E: float, theta,
                   theta_err=Fraction(0), precision_bits: int = 53) -> "CocycleParams":
        """Use the deepest convergent; ``|alpha - p_N/q_N| < 1/q_N^2``."""
        N = table.depth
        q = table.q(N)
        return cls(lam, E, Fraction(theta), table.convergent(N), Fraction(1, q * q),
                   Fraction(theta_err), precision_bits)

    def with_(self, **kw) -> "CocycleParams":
        from dataclasses import replace
        return replace(self, **kw)

    def phase(self, j: int) -> Fraction:
        """``(theta + j alpha) mod 1``, exact."""
        x = self.theta + j * self.alpha
        return x - math.floor(x)

    def phases_float(self, start: int, count: int) -> np.ndarray:
        """Phases ``theta + j alpha mod 1`` for ``j = start .. start+count-1``, reduced exactly."""
        a, b = self.alpha.numerator, self.alpha.denominator
        t = self.theta - math.floor(self.theta)
        tn, td = t.numerator, t.denominator
        M = b * td
        base = tn * b
        step = a * td
        out = np.empty(count)
        for i in range(count):
            out[i] = ((base + (start + i) * step) % M) / M
        return out

    def potentials(self, start: int, count: int, prec: int | None = None):
        """``v_j = 2 lam cos 2 pi (theta + j alpha)`` as floats or mpf at ``prec`` bits."""
        prec = prec or self.precision_bits
        if prec == 53:
            return (2 * self.lam * np.cos(2 * np.pi * self.phases_float(start, count))).tolist()
        with mp.workprec(prec):
            lam2 = 2 * mpmath.mpf(self.lam)
            out = []
            for j in range(start, start + count):
                x = self.phase(j)
                out.append(lam2 * mpmath.cospi(2 * mpmath.mpf(x.numerator) / x.denominator))
            return out


# -- helpers shared by both back ends ---------------------------------------

def _frexp_exp(x) -> int:
    if isinstance(x, float):
        return math.frexp(x)[1]
    return int(mpmath.frexp(x)[1])


def _ldexp(x, e: int):
    if isinstance(x, float):
        return math.ldexp(x, e)
    return mpmath.ldexp(x, e)


def _log_abs(x) -> float:
    if x == 0:
        return -math.inf
    if isinstance(x, float):
        return math.log(abs(x))
    return float(mpmath.log(abs(x)))


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def _rescale(entries: list) -> tuple[list, int]:
    """Divide by the power of two nearest the max entry; returns the exponent removed."""
    big = max(abs(v) for v in entries)
    if big == 0:
        raise NumericError("transfer product underflowed to zero; raise the precision")
    e = _frexp_exp(big)
    return [_ldexp(v, -e) for v in entries], e


@dataclass(frozen=True)
class TransferProduct:
    """``e^{log_scale} * matrix`` with ``max|matrix| = 1``; ``matrix`` is row-major ``(a, b, c, d)``."""

    matrix: tuple
    log_scale: float
    steps: int
    precision_bits: int
    theta_shift: int = 0

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.matrix]).reshape(2, 2)

    def log_entries(self) -> list[tuple[int, float]]:
        """``(sign, ln|entry|)`` of the unscaled product."""
        return [(_sign(v), _log_abs(v) + float(self.log_scale)) for v in self.matrix]

    def log_norm(self) -> float:
        """``ln ||A_k||`` (operator 2-norm)."""
        return float(np.log(np.linalg.norm(self.as_array(), 2))) + float(self.log_scale)


def _multiply_chain(factors: Callable[[int], tuple], count: int, prec: int, R: int) -> tuple[list, int]:
    """Left-multiply ``count`` factors onto the identity, rescaling every ``R`` steps."""
    if prec == 53:
        one, zero = 1.0, 0.0
    else:
        one, zero = mpmath.mpf(1), mpmath.mpf(0)
    a, b, c, d = one, zero, zero, one
    exp_total = 0
    for i in range(count):
        f00, f01, f10, f11 = factors(i)
        a, b, c, d = (f00 * a + f01 * c, f00 * b + f01 * d,
                      f10 * a + f11 * c, f10 * b + f11 * d)
        if (i + 1) % R == 0:
            (a, b, c, d), e = _rescale([a, b, c, d])
            exp_total += e
    return [a, b, c, d], exp_total


def _finish(entries: list, exp_total: int, k: int, prec: int, shift: int) -> TransferProduct:
    big = max(abs(v) for v in entries)
    if big == 0:
        raise NumericError("transfer product underflowed to zero; raise the precision")
    if prec == 53:
        m = tuple(v / big for v in entries)
        s = exp_total * LN2 + math.log(big)
    else:
        m = tuple(v / big for v in entries)
        s = exp_total * mpmath.ln2 + mpmath.log(big)
    return TransferProduct(m, s, k, prec, shift)


def _product_from_potentials(E, pot: Sequence, k: int, prec: int, R: int, shift: int,
                             inverse: bool = False) -> TransferProduct:
    with mp.workprec(prec):
        if prec == 53:
            Ev = float(E)
            one = 1.0
        else:
            Ev = mpmath.mpf(E)
            one = mpmath.mpf(1)
        if not inverse:
            fac = lambda i: (Ev - pot[i], -one, one, 0 * one)
        else:
            # A(phi)^{-1} = [[0, 1], [-1, E - v]]
            fac = lambda i: (0 * one, one, -one, Ev - pot[i])
        entries, e = _multiply_chain(fac, k, prec, R)
        return _finish(entries, e, k, prec, shift)


def transfer_product(params: CocycleParams, k: int, base_shift: int = 0,
                     R: int = DEFAULT_R, prec: int | None = None) -> TransferProduct:
    """``A_k(theta + base_shift alpha)``; negative ``k`` gives ``A_{k}^{-1}`` shifted back by ``|k|``."""
    if k == 0:
        raise DomainError("k must be nonzero")
    prec = prec or params.precision_bits
    if k > 0:
        pot = params.potentials(base_shift, k, prec)
        return _product_from_potentials(params.E, pot, k, prec, R, base_shift)
    n = -k
    # factors A(theta' - j alpha)^{-1}, j = 1..n, applied in that order
    pot = params.potentials(base_shift - n, n, prec)[::-1]
    return _product_from_potentials(params.E, pot, n, prec, R, base_shift, inverse=True)


def required_precision(log_scale: float, k: int, base_bits: int = 128) -> int:
    """Bits needed so that a quantity ``e^{-2 log_scale}`` survives the cancellation."""
    return int(base_bits + math.ceil(2 * float(log_scale) / LN2) + math.ceil(math.log2(k + 1)) + 64)


@dataclass(frozen=True)
class DetCheck:
    k: int
    log_scale: float
    literal_deviation: float   # |det(A_k) - 1| from the escalated-precision product
    literal_bits: int
    cancellation_deviation: float  # |ad - bc - e^{-2s}| / (|ad| + |bc|) at the base precision
    base_bits: int


def det_check(params: CocycleParams, k: int, R: int = DEFAULT_R) -> DetCheck:
    """Reconstruct ``det A_k`` two ways.

    At the base precision ``ad - bc`` cancels about ``2 s / ln 2`` bits, so the
    relative error is measured against ``|ad| + |bc|``. The literal check reruns
    the same factors (potentials rounded at the base precision) at a working
    precision large enough to hold the cancellation.
    """
    base = max(params.precision_bits, 64)
    pot = params.potentials(0, k, base)
    tp = _product_from_potentials(params.E, pot, k, base, R, 0)
    with mp.workprec(base):
        a, b, c, d = (mpmath.mpf(v) for v in tp.matrix)
        s = mpmath.mpf(tp.log_scale)
        ad, bc = a * d, b * c
        canc = abs(ad - bc - mpmath.exp(-2 * s)) / (abs(ad) + abs(bc))
    bits = required_precision(tp.log_scale, k, base)
    tp2 = _product_from_potentials(params.E, pot, k, bits, R, 0)
    with mp.workprec(bits):
        a, b, c, d = tp2.matrix
        det = (a * d - b * c) * mpmath.exp(2 * tp2.log_scale)
        lit = abs(det - 1)
    return DetCheck(k, float(tp.log_scale), float(lit), bits, float(canc), base)


def compose_check(params: CocycleParams, k: int, R: int = DEFAULT_R) -> float:
    """``max |A_k(theta) A_{-k}(theta + k alpha) - I|`` with precision escalated for the cancellation."""
    base = max(params.precision_bits, 64)
    probe = transfer_product(params, k, 0, R, base)
    bits = required_precision(probe.log_scale, k, base)
    fwd = transfer_product(params, k, 0, R, bits)
    inv = transfer_product(params, -k, k, R, bits)
    with mp.workprec(bits):
        a = mpmath.matrix([[fwd.matrix[0], fwd.matrix[1]], [fwd.matrix[2], fwd.matrix[3]]])
        b = mpmath.matrix([[inv.matrix[0], inv.matrix[1]], [inv.matrix[2], inv.matrix[3]]])
        prod = (a * b) * mpmath.exp(fwd.log_scale + inv.log_scale)
        dev = max(abs(prod[i, j] - (1 if i == j else 0)) for i in range(2) for j in range(2))
    return float(dev)


# -- box determinants --------------------------------------------------------

@dataclass(frozen=True)
class DeterminantSeq:
    """``P_k(theta + base_shift alpha)`` for ``k = 0 .. k_max`` as ``(k, sign, ln|P_k|)``."""

    entries: tuple[tuple[int, int, float], ...]
    base_shift: int
    precision_bits: int
    window: tuple[int, int] | None = None

    def sign(self, k: int) -> int:
        return self.entries[k][1]

    def log_abs(self, k: int) -> float:
        return self.entries[k][2]

    def value(self, k: int) -> float:
        _, s, la = self.entries[k]
        return s * math.exp(la)


def _pk_chain(E, pot: Sequence, prec: int, R: int):
    """Run the three-term recursion; returns ``(entries, worst_loss, k_at_worst)``."""
    if prec == 53:
        Ev, p2, p1 = float(E), 0.0, 1.0
    else:
        Ev, p2, p1 = mpmath.mpf(E), mpmath.mpf(0), mpmath.mpf(1)
    exp_total = 0
    entries = [(0, 1, 0.0)]
    worst, worst_k = 0.0, 0
    for i, v in enumerate(pot):
        t1 = (Ev - v) * p1
        new = t1 - p2
        big = max(abs(t1), abs(p2))
        if big:
            lost = math.inf if new == 0 else _log_abs(big) / LN2 - _log_abs(new) / LN2
            if lost > worst:
                worst, worst_k = lost, i + 1
        p2, p1 = p1, new
        entries.append((i + 1, _sign(new), _log_abs(new) + exp_total * LN2))
        if (i + 1) % R == 0:
            (p1, p2), e = _rescale([p1, p2])
            exp_total += e
    return entries, worst, worst_k


def pk_sequence(params: CocycleParams, k_max: int, base_shift: int = 0,
                R: int = DEFAULT_R, max_precision_bits: int = 4096) -> DeterminantSeq:
    """``P_0 .. P_{k_max}`` at ``theta + base_shift alpha``.

    If some step cancels more than half the working precision the whole chain
    is recomputed at doubled precision, up to ``max_precision_bits``.
    """
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    prec = params.precision_bits
    while True:
        with mp.workprec(prec):
            pot = params.potentials(base_shift, k_max, prec)
            entries, worst, worst_k = _pk_chain(params.E, pot, prec, R)
        if worst <= prec / 2:
            return DeterminantSeq(tuple(entries), base_shift, prec)
        if 2 * prec > max_precision_bits:
            raise NumericError(
                f"P_{worst_k} loses {worst:.0f} bits to cancellation even at {prec} bits")
        prec *= 2


def box_determinant(params: CocycleParams, x1: int, x2: int) -> tuple[int, float]:
    """``P_{[x1,x2]}(theta) = P_{x2-x1+1}(theta + x1 alpha)`` as ``(sign, ln|.|)``."""
    seq = pk_sequence(params, x2 - x1 + 1, base_shift=x1)
    return seq.sign(x2 - x1 + 1), seq.log_abs(x2 - x1 + 1)


# -- Lyapunov exponent -------------------------------------------------------

@dataclass(frozen=True)
class LyapunovEstimate:
    L_avg: float
    L_sup: float
    stderr: float
    thetas: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    k: int = 0


def lyapunov_estimate(params: CocycleParams, k: int, theta_samples: int,
                      theta0: float | None = None, R: int = DEFAULT_R) -> LyapunovEstimate:
    """``(1/k) ln ||A_k(theta_i)||`` on the grid ``theta_i = theta0 + i/samples``."""
    if k < 100:
        raise DomainError("k must be >= 100")
    if theta_samples < 8:
        raise DomainError("theta_samples must be >= 8")
    if params.alpha.denominator <= 1:
        raise DomainError("alpha must be a non-integer rational approximant")
    t0 = float(params.theta if theta0 is None else theta0)
    thetas = (t0 + np.arange(theta_samples) / theta_samples) % 1.0
    shifts = CocycleParams(params.lam, params.E, Fraction(0), params.alpha).phases_float(0, k)
    a = np.ones(theta_samples); b = np.zeros(theta_samples)
    c = np.zeros(theta_samples); d = np.ones(theta_samples)
    log_scale = np.zeros(theta_samples)
    lam2, E = 2.0 * params.lam, float(params.E)
    for i in range(k):
        w = E - lam2 * np.cos(2 * np.pi * (thetas + shifts[i]))
        a, b, c, d = w * a - c, w * b - d, a, b
        if (i + 1) % R == 0:
            big = np.maximum.reduce([np.abs(a), np.abs(b), np.abs(c), np.abs(d)])
            e = np.frexp(big)[1]
            a, b, c, d = (np.ldexp(x, -e) for x in (a, b, c, d))
            log_scale += e * LN2
    mats = np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)
    vals = (np.log(np.linalg.norm(mats, ord=2, axis=(-2, -1))) + log_scale) / k
    stderr = float(np.std(vals, ddof=1) / math.sqrt(theta_samples))
    return LyapunovEstimate(float(vals.mean()), float(vals.max()), stderr, thetas, vals, k)


# -- Green's function edges --------------------------------------------------

def _log_chain(diag: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``D_i = diag[i-1] D_{i-1} - D_{i-2}`` with ``D_0 = 1``; returns sign, ln|D|, bits lost."""
    diag = [float(x) for x in diag]
    n = len(diag)
    sign = np.ones(n + 1, dtype=int)
    logs = np.zeros(n + 1)
    lost = np.zeros(n + 1)
    p2, p1, off = 0.0, 1.0, 0.0
    for i in range(n):
        t1 = diag[i] * p1
        new = t1 - p2
        big = max(abs(t1), abs(p2))
        lost[i + 1] = (math.inf if new == 0 else math.log2(big / abs(new))) if big else 0.0
        sign[i + 1] = (new > 0) - (new < 0)
        logs[i + 1] = (math.log(abs(new)) if new else -math.inf) + off
        p2, p1 = p1, new
        m = max(abs(p1), abs(p2))
        if m > 2.0**64 or (0 < m < 2.0**-64):
            e = math.frexp(m)[1]
            p1, p2 = math.ldexp(p1, -e), math.ldexp(p2, -e)
            off += e * LN2
    return sign, logs, lost


def box_condition_bits(fwd_logs: np.ndarray, bwd_logs: np.ndarray) -> float:
    """``log2 max_i |P_[x1,x1+i-1] P_[x1+i+1,x2]| / |P_[x1,x2]|``.

    Rounding in the recursion perturbs ``P_[x1,x2]`` by about ``eps`` times the
    largest such cofactor product, so this is the number of bits the box
    determinant cannot be trusted to.
    """
    n = len(fwd_logs) - 1
    i = np.arange(n)
    worst = float(np.max(fwd_logs[i] + bwd_logs[n - 1 - i]))
    return (worst - float(fwd_logs[n])) / LN2


@dataclass(frozen=True)
class GreenEdge:
    left: tuple[int, float]    # G(x1, y)
    right: tuple[int, float]   # G(y, x2)
    box: tuple[int, float]     # P_[x1,x2]
    residual: float | None = None

    def value(self, which: str = "left") -> float:
        s, la = getattr(self, which)
        return s * math.exp(la)


def window_potentials(params: CocycleParams, x1: int, x2: int) -> np.ndarray:
    return np.asarray(params.with_(precision_bits=53).potentials(x1, x2 - x1 + 1, 53))


def green_edge(params: CocycleParams, window: tuple[int, int], y: int,
               phi: Callable[[int], float] | None = None,
               max_lost_bits: float = 26.0) -> GreenEdge:
    """Edge entries of ``(H - E)^{-1}`` on ``[x1, x2]`` from box determinants.

    ``G(x1, y) = -P_[y+1,x2] / P_[x1,x2]`` and ``G(y, x2) = -P_[x1,y-1] / P_[x1,x2]``.
    With ``phi`` given, also returns the residual of
    ``phi(y) = -G(x1,y) phi(x1-1) - G(y,x2) phi(x2+1)``.
    """
    x1, x2 = window
    if not x1 <= y <= x2:
        raise DomainError("need x1 <= y <= x2")
    v = window_potentials(params, x1, x2)
    diag = float(params.E) - v
    fs, fl, _ = _log_chain(diag)
    bs, bl, _ = _log_chain(diag[::-1])
    n = x2 - x1 + 1
    lost = box_condition_bits(fl, bl)
    if lost > max_lost_bits:
        raise ConditioningError(
            f"box determinant on [{x1},{x2}] is ill-conditioned: {lost:.0f} bits lost "
            f"(ln|P| = {fl[n]:.3g})", log_abs=float(fl[n]))
    box = (int(fs[n]), float(fl[n]))
    left = (-int(bs[x2 - y]) * box[0], float(bl[x2 - y] - box[1]))
    right = (-int(fs[y - x1]) * box[0], float(fl[y - x1] - box[1]))
    res = None
    if phi is not None:
        gl = left[0] * math.exp(left[1])
        gr = right[0] * math.exp(right[1])
        res = abs(phi(y) + gl * phi(x1 - 1) + gr * phi(x2 + 1))
    return GreenEdge(left, right, box, res)


# -- Lagrange interpolation terms --------------------------------------------

@dataclass(frozen=True)
class LagrangeSet:
    thetas: tuple
    lag: np.ndarray
    max_grid: int
    argmax_x: np.ndarray = field(repr=False, default=None)


def _node_logs(thetas: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``cos 2 pi theta_j`` and ``ln|c_m - c_j|`` via the product-of-sines form."""
    n = len(thetas)
    exact = all(isinstance(t, (Fraction, int)) for t in thetas)
    nodes = np.array([math.cos(2 * math.pi * float(t - math.floor(t))) for t in thetas])
    logd = np.zeros((n, n))
    for m in range(n):
        for j in range(m + 1, n):
            if exact:
                s = thetas[m] + thetas[j]
                d = thetas[m] - thetas[j]
                s = float(s - math.floor(s))
                d = float(d - math.floor(d))
            else:
                s = float(thetas[m]) + float(thetas[j])
                d = float(thetas[m]) - float(thetas[j])
            val = 2 * abs(math.sin(math.pi * s) * math.sin(math.pi * d))
            logd[m, j] = logd[j, m] = math.log(val) if val > 0 else -math.inf
    return nodes, logd


def _max_log_poly(roots: np.ndarray, grid: np.ndarray, iters: int = 80) -> tuple[float, float]:
    """``max_{x in [-1,1]} sum ln|x - r|`` over the given roots.

    ``ln|p|`` is concave between consecutive roots, so each gap has one critical
    point, found by bisection on the monotone derivative. Grid and endpoints are
    evaluated too.
    """
    r = np.sort(roots)
    cand = [np.array([-1.0, 1.0]), grid]
    if len(r) >= 2:
        lo, hi = r[:-1].copy(), r[1:].copy()
        keep = hi > lo
        lo, hi = lo[keep], hi[keep]
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            g = np.sum(1.0 / (mid[:, None] - r[None, :]), axis=1)
            pos = g > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        cand.append(0.5 * (lo + hi))
    x = np.concatenate(cand)
    x = x[(x >= -1) & (x <= 1)]
    with np.errstate(divide="ignore"):
        vals = np.sum(np.log(np.abs(x[:, None] - r[None, :])), axis=1)
    i = int(np.argmax(vals))
    return float(vals[i]), float(x[i])


def lagrange_terms(thetas: Sequence, grid_size: int = 4096,
                   min_separation: float = 1e-15) -> LagrangeSet:
    """``Lag_m = ln max_{x in [-1,1]} prod_{j != m} |x - c_j| / |c_m - c_j|`` for every ``m``."""
    thetas = tuple(thetas)
    n = len(thetas)
    if n == 0:
        raise DomainError("need at least one theta")
    if n == 1:
        return LagrangeSet(thetas, np.zeros(1), grid_size, np.zeros(1))
    nodes, logd = _node_logs(thetas)
    off = ~np.eye(n, dtype=bool)
    if np.min(np.where(off, logd, np.inf)) < math.log(min_separation):
        raise DegeneracyError("nodes cos 2 pi theta_j coincide (or nearly)")
    grid = np.cos(np.pi * (np.arange(grid_size) + 0.5) / grid_size)
    lag = np.empty(n)
    xs = np.empty(n)
    for m in range(n):
        others = np.delete(nodes, m)
        num, x = _max_log_poly(others, grid)
        lag[m] = num - np.sum(np.delete(logd[m], m))
        xs[m] = x
    return LagrangeSet(thetas, lag, grid_size, xs)


@dataclass(frozen=True)
class UniformityCheck:
    k: int
    lhs: np.ndarray      # ln|P_k(theta_m - (k-1) alpha/2)|
    rhs: np.ndarray      # kL - Lag_m - ln(k+1)
    lag: np.ndarray

    @property
    def margin(self) -> float:
        return float(np.max(self.lhs - self.rhs))

    def holds(self, slack: float = 1 - 1e-6) -> bool:
        return bool(np.any(self.lhs >= self.rhs + math.log(slack)))


def uniformity_check(params: CocycleParams, thetas: Sequence[Fraction],
                     grid_size: int = 4096) -> UniformityCheck:
    """Both sides of ``|P_k(theta_m - (k-1)alpha/2)| >= e^{kL - Lag_m}/(k+1)`` for each ``m``."""
    k = len(thetas) - 1
    if k < 1:
        raise DomainError("need at least two thetas")
    L = math.log(params.lam)
    lag = lagrange_terms(thetas, grid_size).lag
    lhs = np.empty(k + 1)
    for m, t in enumerate(thetas):
        p = params.with_(theta=Fraction(t) - (k - 1) * params.alpha / 2)
        seq = pk_sequence(p, k)
        lhs[m] = seq.log_abs(k)
    rhs = k * L - lag - math.log(k + 1)
    return UniformityCheck(k, lhs, rhs, lag)


# -- Lag bounds on the resonant-site interval pairs --------------------------

CLAIMS = ("C1", "C2", "C3")


@dataclass(frozen=True)
class ClaimReport:
    claim: str
    n: int
    q_n: int
    beta_n: float
    eps: float
    ell: int
    bound: float
    sites: tuple[int, ...]
    lag: np.ndarray = field(repr=False)
    grid_size: int = 4096
    s: int | None = None
    n0: int | None = None

    @property
    def max_lag(self) -> float:
        return float(np.max(self.lag))

    @property
    def ok(self) -> bool:
        return bool(np.all(self.lag <= self.bound))

    @property
    def max_ratio(self) -> float:
        """``max_m Lag_m / bound``."""
        return self.max_lag / self.bound

    @property
    def beta_ratio(self) -> float:
        """``max_m Lag_m / (c beta_n q_n)`` with ``c = 3`` for C2, else 1."""
        c = 3 if self.claim == "C2" else 1
        return self.max_lag / (c * self.beta_n * self.q_n)


def claim_sites(table: ConvergentTable, phase, n: int, claim: str, eps: Fraction,
                ell: int) -> tuple[list[int], dict]:
    """Integer sites ``m`` in ``I_1 u I_2`` for the requested claim."""
    if claim not in CLAIMS:
        raise ValidationError(f"unknown claim {claim!r}")
    if ell == 0:
        raise ValidationError("ell must be nonzero: I_1 and I_2 would coincide")
    q = table.q(n)
    odd_like = (n % 2 == 1) == (phase.case_tag == "Case1")
    if claim in ("C1", "C2") and not odd_like:
        raise ValidationError(f"{claim} needs the resonant parity (n odd in Case1, even in Case2)")
    if claim == "C3" and odd_like:
        raise ValidationError("C3 needs the non-resonant parity (n even in Case1, odd in Case2)")
    info = {}
    if claim == "C1":
        j = (n + 1) // 2 if phase.case_tag == "Case1" else (n + 2) // 2
        if j not in phase.j_values:
            raise DomainError(f"k_j for j = {j} is not part of the construction")
        kj = phase.k(j)
        target = Fraction(kj, 2) - 2 * eps * q
        n0 = next((i for i in range(1, n + 1) if table.q(n - i) <= eps / 2 * target), None)
        if target <= 0 or n0 is None:
            raise DomainError("k_j/2 - 2 eps q_n too small for the C1 windows; reduce eps")
        qq = table.q(n - n0)
        s = math.floor(target / qq)
        if s < 1:
            raise DomainError("no positive s for the C1 windows")
        info = {"s": s, "n0": n0, "k_j": kj}
        w = s * qq
        I1 = range(-w, w)
        I2 = range(ell * q + kj - w, ell * q + kj + w)
    else:
        h = q // 2
        I1 = range(-h, q - h)
        I2 = range(ell * q - h, (ell + 1) * q - h)
    sites = sorted(set(I1) | set(I2))
    return sites, info


def check_claims(table: ConvergentTable, phase, n: int, claim: str,
                 eps: float | Fraction = Fraction(1, 10), ell: int = 1,
                 grid_size: int = 4096, max_nodes: int = 2048,
                 theta: Fraction | None = None) -> ClaimReport:
    """Compute ``Lag_m`` for ``theta_m = theta + m alpha`` over the claim's sites and compare
    with ``(beta_n + eps) q_n`` (C1, C3) or ``(3 beta_n + eps) q_n`` (C2)."""
    eps = Fraction(eps).limit_denominator(10**9) if isinstance(eps, float) else Fraction(eps)
    if n + 1 > table.depth:
        raise DomainError(f"need q_{n + 1}; table depth is {table.depth}")
    sites, info = claim_sites(table, phase, n, claim, eps, ell)
    if len(sites) > max_nodes:
        raise ResourceError(f"{len(sites)} nodes exceed the budget of {max_nodes}")
    theta = phase.midpoint if theta is None else Fraction(theta)
    alpha = table.convergent(table.depth)
    q = table.q(n)
    beta_n = math.log(table.q(n + 1)) / q
    c = 3 if claim == "C2" else 1
    bound = (c * beta_n + float(eps)) * q
    thetas = [theta + m * alpha for m in sites]
    lag = lagrange_terms(thetas, grid_size).lag
    return ClaimReport(claim, n, q, beta_n, float(eps), ell, bound, tuple(sites), lag,
                       grid_size, info.get("s"), info.get("n0"))
