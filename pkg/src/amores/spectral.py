"""Truncated almost Mathieu operator on ``[-N, N]`` with Dirichlet boundary.

Eigenpairs come from LAPACK's symmetric tridiagonal solver. LAPACK vectors are
only accurate down to about ``1e-16`` of their peak, so the log profile is
rebuilt from the eigen-equation with the ratio (Miller) recursions run inward
from both boundaries, which resolves decay far below the float range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import stats
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .cocycle import CocycleParams
from .contfrac import ConvergentTable
from .errors import DomainError, NumericError, ResourceError

N_CAP = 20_000
DEFAULT_B_FACTOR = 1e-7


@dataclass(frozen=True)
class OperatorWindow:
    N: int
    lam: float
    theta: Fraction
    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "theta", Fraction(self.theta))
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if self.N < 0:
            raise DomainError("N must be >= 0")

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def diagonal(self) -> np.ndarray:
        p = CocycleParams(self.lam, 0.0, self.theta, self.alpha)
        return np.asarray(p.potentials(-self.N, 2 * self.N + 1, 53))

    @property
    def norm_bound(self) -> float:
        return 2 + 2 * abs(self.lam)

    def dense(self) -> np.ndarray:
        n = 2 * self.N + 1
        return np.diag(self.diagonal) + np.eye(n, k=1) + np.eye(n, k=-1)

    def params(self, E: float = 0.0) -> CocycleParams:
        return CocycleParams(self.lam, E, self.theta, self.alpha)


def _ratio_profile(v: np.ndarray, E: float, peak: int) -> np.ndarray:
    """``ln|phi(i)| - ln|phi(peak)|`` from the decaying ratio recursions on both sides."""
    n = len(v)
    out = np.zeros(n)
    # right: t_i = phi(i+1)/phi(i), t_{n-1} = 0, t_{i-1} = 1/(E - v_i - t_i)
    t = 0.0
    ratios = np.zeros(n)
    for i in range(n - 1, peak, -1):
        d = E - v[i] - t
        t = 1.0 / d if d != 0 else math.inf
        ratios[i - 1] = t
    acc = 0.0
    for i in range(peak + 1, n):
        acc += math.log(abs(ratios[i - 1])) if ratios[i - 1] != 0 else -math.inf
        out[i] = acc
    # left: s_i = phi(i-1)/phi(i), s_0 = 0, s_{i+1} = 1/(E - v_i - s_i)
    s = 0.0
    for i in range(0, peak):
        d = E - v[i] - s
        s = 1.0 / d if d != 0 else math.inf
        ratios[i + 1] = s
    acc = 0.0
    for i in range(peak - 1, -1, -1):
        acc += math.log(abs(ratios[i + 1])) if ratios[i + 1] != 0 else -math.inf
        out[i] = acc
    return out


@dataclass(frozen=True)
class EigenProfile:
    eigenvalue: float
    sites: np.ndarray = field(repr=False)
    vector: np.ndarray = field(repr=False)      # phi(peak) = 1
    potentials: np.ndarray = field(repr=False)
    peak: int                                   # site label of the peak
    residual: float
    lam: float
    offset: int = 0                             # sites have been shifted by -offset

    @cached_property
    def log_profile(self) -> np.ndarray:
        """``ln|phi(n)|`` from the ratio recursions (0 at the peak)."""
        return _ratio_profile(self.potentials, self.eigenvalue, self.index(self.peak))

    @property
    def N(self) -> int:
        return (len(self.sites) - 1) // 2

    def index(self, site: int) -> int:
        return int(site - self.sites[0])

    def log_at(self, site: int) -> float:
        i = self.index(site)
        if not 0 <= i < len(self.sites):
            raise DomainError(f"site {site} outside the window")
        return float(self.log_profile[i])

    def recentered(self) -> "EigenProfile":
        """Shift labels so the peak sits at 0 (the theta of the operator moves by ``peak * alpha``)."""
        if self.peak == 0:
            return self
        return replace(self, sites=self.sites - self.peak, peak=0, offset=self.offset + self.peak)


def build_profile(window: OperatorWindow, E: float, vec: np.ndarray,
                  v: np.ndarray | None = None) -> EigenProfile:
    v = window.diagonal if v is None else v
    ip = int(np.argmax(np.abs(vec)))
    phi = vec / vec[ip]
    Hphi = v * phi
    Hphi[1:] += phi[:-1]
    Hphi[:-1] += phi[1:]
    res = float(np.max(np.abs(Hphi - E * phi)))
    return EigenProfile(float(E), window.sites.copy(), phi, v, int(window.sites[ip]), res, window.lam)


def assemble_and_solve(window: OperatorWindow, which="all", cap: int = N_CAP) -> list[EigenProfile]:
    """Eigenpairs selected by ``"all"``, an energy interval ``(Emin, Emax)``, an index
    ``k``, or an index range ``range(i, j)``."""
    if window.N > cap:
        raise ResourceError(f"N = {window.N} exceeds the cap {cap}")
    v = window.diagonal
    e = np.ones(len(v) - 1)
    kw = {}
    if isinstance(which, str) and which == "all":
        kw = {"select": "a"}
    elif isinstance(which, (int, np.integer)):
        kw = {"select": "i", "select_range": (int(which), int(which))}
    elif isinstance(which, range):
        kw = {"select": "i", "select_range": (which.start, which.stop - 1)}
    else:
        lo, hi = which
        kw = {"select": "v", "select_range": (float(lo), float(hi))}
    try:
        w, V = eigh_tridiagonal(v, e, **kw)
    except (LinAlgError, ValueError) as exc:
        raise NumericError(f"tridiagonal eigensolver failed: {exc}") from exc
    return [build_profile(window, float(w[i]), V[:, i], v) for i in range(len(w))]


def eigenvalues(window: OperatorWindow) -> np.ndarray:
    v = window.diagonal
    return eigh_tridiagonal(v, np.ones(len(v) - 1), eigvals_only=True)


def charpoly_eigenvalues(window: OperatorWindow, dps: int = 60) -> np.ndarray:
    """Roots of ``det(E - H)`` from the three-term recursion in mpmath (small ``N`` only)."""
    import mpmath
    if window.N > 12:
        raise ResourceError("characteristic-polynomial oracle is for N <= 12")
    with mpmath.workdps(dps):
        lam2 = 2 * mpmath.mpf(window.lam)
        vs = []
        for n in window.sites:
            x = window.theta + int(n) * window.alpha
            x -= math.floor(x)
            vs.append(lam2 * mpmath.cospi(2 * mpmath.mpf(x.numerator) / x.denominator))
        # polynomial coefficients, highest degree first
        p_prev, p = [mpmath.mpf(1)], [mpmath.mpf(1), -vs[0]]
        for v in vs[1:]:
            nxt = [mpmath.mpf(0)] * (len(p) + 1)
            for i, c in enumerate(p):
                nxt[i] += c
                nxt[i + 1] -= v * c
            for i, c in enumerate(p_prev):
                nxt[i + 2] -= c
            p_prev, p = p, nxt
        roots = mpmath.polyroots(p, maxsteps=400, extraprec=4 * dps)
        return np.sort(np.array([float(mpmath.re(r)) for r in roots]))


def profile_nearest(window: OperatorWindow, site: int = 0, chunk: int = 400) -> EigenProfile:
    """The eigenprofile whose peak is closest to ``site`` (ties: lower energy)."""
    v = window.diagonal
    e = np.ones(len(v) - 1)
    n = len(v)
    best = None
    for start in range(0, n, chunk):
        stop = min(n, start + chunk) - 1
        w, V = eigh_tridiagonal(v, e, select="i", select_range=(start, stop))
        peaks = window.sites[np.argmax(np.abs(V), axis=0)]
        i = int(np.argmin(np.abs(peaks - site)))
        if best is None or abs(peaks[i] - site) < abs(best[0] - site):
            best = (int(peaks[i]), float(w[i]), V[:, i].copy())
    return build_profile(window, best[1], best[2], v)


# -- decay fits ---------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    slope: float
    ci: tuple[float, float]
    r2: float
    points: int


def fit_log_decay(dist: np.ndarray, logs: np.ndarray, level: float = 0.95) -> SlopeFit:
    ok = np.isfinite(logs)
    dist, logs = dist[ok], logs[ok]
    if len(dist) < 3:
        raise DomainError("too few points for a decay fit")
    fit = stats.linregress(dist, logs)
    tq = stats.t.ppf(0.5 + level / 2, len(dist) - 2)
    slope = -fit.slope
    half = tq * fit.stderr
    return SlopeFit(float(slope), (float(slope - half), float(slope + half)), float(fit.rvalue**2), len(dist))


def decay_slope(profile: EigenProfile, window_frac: float = 0.5,
                exclude: Iterable[tuple[int, int]] = (), min_points: int = 8) -> SlopeFit:
    """Fit ``ln|phi| ~ -slope |n - peak|`` over the middle ``window_frac`` of each side.

    ``exclude`` holds ``(center, radius)`` pairs, in distance-from-peak units,
    removed from the fit (resonance collars).
    """
    if not 0 < window_frac <= 1:
        raise DomainError("window_frac must be in (0, 1]")
    N = profile.N
    left = profile.peak - int(profile.sites[0])
    right = int(profile.sites[-1]) - profile.peak
    if min(left, right) < window_frac * N:
        raise DomainError("peak too close to the boundary for the requested window")
    dist, logs = [], []
    for side, sgn in ((right, 1), (left, -1)):
        a = int(round(side * (1 - window_frac) / 2))
        b = int(round(side * (1 + window_frac) / 2))
        d = np.arange(max(a, 1), b + 1)
        keep = np.ones(len(d), dtype=bool)
        for c, r in exclude:
            keep &= np.abs(d - c) > r
        d = d[keep]
        idx = profile.index(profile.peak) + sgn * d
        dist.append(d)
        logs.append(profile.log_profile[idx])
    dist, logs = np.concatenate(dist), np.concatenate(logs)
    if len(dist) < min_points:
        raise DomainError(f"only {len(dist)} points left for the fit")
    return fit_log_decay(dist.astype(float), logs)


def interior_profiles(window: OperatorWindow, count: int, frac: float = 0.5,
                      pool: int | None = None) -> list[EigenProfile]:
    """``count`` eigenprofiles from the middle of the spectrum with peaks within ``frac N`` of 0."""
    n = 2 * window.N + 1
    pool = pool or min(n, max(20 * count, 200))
    start = max(0, n // 2 - pool // 2)
    profiles = assemble_and_solve(window, range(start, min(n, start + pool)))
    chosen = [p for p in profiles if abs(p.peak) <= (1 - frac) * window.N]
    chosen.sort(key=lambda p: abs(p.eigenvalue - np.median([q.eigenvalue for q in profiles])))
    return chosen[:count]


# -- resonance amplitudes ----------------------------------------------------

def resonant_j(phase, n: int) -> int | None:
    """The ``j`` whose site ``k_j`` pairs with scale ``q_n`` (``n = 2j-1`` in Case1, ``2j-2`` in Case2)."""
    for j in phase.j_values:
        if phase.scale_index(j) - 1 == n:
            return j
    return None


@dataclass(frozen=True)
class RTable:
    n: int
    q_n: int
    eps: float
    k_j: int | None
    ells: tuple[int, ...]
    log_r: dict           # ell -> ln r_ell
    log_r_eta: dict       # ell -> ln r_{ell+eta}
    ell_limit: int

    def r(self, ell: int) -> float:
        return math.exp(self.log_r[ell])


def _window_sup(profile: EigenProfile, center: int, radius: int, origin: int) -> float:
    lo, hi = origin + center - radius, origin + center + radius
    if profile.index(lo) < 0 or profile.index(hi) >= len(profile.sites):
        raise DomainError(f"r-window [{lo}, {hi}] exceeds the operator window")
    return float(np.max(profile.log_profile[profile.index(lo): profile.index(hi) + 1]))


def ell_limit(table: ConvergentTable, eta: Fraction, n: int, factor: float = 50,
              b_factor: float = DEFAULT_B_FACTOR) -> int:
    """``floor(factor * b_{n+1}/q_n)`` with ``b_m = b_factor * eta * q_m``."""
    return int(math.floor(factor * b_factor * float(eta) * table.q(n + 1) / table.q(n)))


def resonance_amplitudes(profile: EigenProfile, table: ConvergentTable, phase, n: int,
                         eps: float = 0.01, ells: Sequence[int] | None = None,
                         cap: int = 8, b_factor: float = DEFAULT_B_FACTOR,
                         origin: int = 0) -> RTable:
    """``ln r_ell`` and ``ln r_{ell+eta}`` over integer sites within ``10 eps q_n`` of the centers.

    Sites are absolute operator labels shifted by ``origin`` (0 keeps the labels
    the phase construction refers to).
    """
    q = table.q(n)
    if q > profile.N / 4:
        raise DomainError(f"q_{n} = {q} exceeds N/4")
    limit = ell_limit(table, phase.eta, n, 50, b_factor)
    if ells is None:
        lim = min(cap, limit)
        ells = [l for l in range(-lim, lim + 1)
                if abs(l * q) + q + int(10 * eps * q) <= profile.N - abs(origin)]
    radius = int(math.floor(10 * eps * q))
    j = resonant_j(phase, n)
    kj = phase.k(j) if j is not None else None
    log_r, log_eta = {}, {}
    for l in ells:
        log_r[l] = _window_sup(profile, l * q, radius, origin)
        if kj is not None:
            log_eta[l] = _window_sup(profile, l * q + kj, radius, origin)
    return RTable(n, q, eps, kj, tuple(ells), log_r, log_eta, limit)


# -- inequality audits ------------------------------------------------------

def _logsumexp(*terms: float) -> float:
    finite = [t for t in terms if t != -math.inf]
    if not finite:
        return -math.inf
    m = max(finite)
    return m + math.log(sum(math.exp(t - m) for t in finite))


@dataclass
class AuditReport:
    kind: str
    n: int
    eps: float
    rows: list = field(default_factory=list)
    flagged: int = 0
    skipped: int = 0

    @property
    def min_margin(self) -> float:
        vals = [r["log_margin"] for r in self.rows if "log_margin" in r]
        return min(vals) if vals else math.inf

    @property
    def c_values(self) -> list[float]:
        return [r["C_implied"] for r in self.rows if "C_implied" in r]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "eps": self.eps, "flagged": self.flagged,
                "skipped": self.skipped, "rows": self.rows}


def audit_decay_lemma(profile: EigenProfile, table: ConvergentTable, phase, n: int,
                      eps: float = 0.01, L: float | None = None, ells: Sequence[int] | None = None,
                      origin: int = 0, stride: int = 1) -> AuditReport:
    """Margins ``ln RHS - ln|phi(y)|`` of the non-resonant decay bound; negative margins are flagged."""
    L = math.log(profile.lam) if L is None else L
    rt = resonance_amplitudes(profile, table, phase, n, eps, ells, origin=origin)
    q = rt.q_n
    collar = 10 * eps * q
    shrink = 3 * eps * q
    rate = L - eps
    rep = AuditReport("lemma51", n, eps)
    odd_like = rt.k_j is not None
    for l in rt.ells:
        if l + 1 not in rt.log_r and not odd_like:
            continue
        base = l * q
        if odd_like:
            kj = rt.k_j
            segs = [(base + collar, base + kj - collar, rt.log_r[l], base, rt.log_r_eta.get(l), base + kj),
                    (base + kj + collar, base + q - collar, rt.log_r_eta.get(l), base + kj,
                     rt.log_r.get(l + 1), base + q)]
        else:
            segs = [(base + collar, base + q - collar, rt.log_r[l], base, rt.log_r.get(l + 1), base + q)]
        for lo, hi, la, ca, lb, cb in segs:
            if la is None or lb is None:
                rep.skipped += 1
                continue
            for y in range(math.ceil(lo), math.floor(hi) + 1, stride):
                site = origin + y
                if profile.index(site) < 0 or profile.index(site) >= len(profile.sites):
                    rep.skipped += 1
                    continue
                rhs = _logsumexp(la - rate * (abs(y - ca) - shrink), lb - rate * (abs(cb - y) - shrink))
                m = rhs - profile.log_at(site)
                if m < 0:
                    rep.flagged += 1
                rep.rows.append({"ell": l, "y": y, "log_margin": m})
    return rep


def audit_resonant_recursions(profile: EigenProfile, table: ConvergentTable, phase, n: int,
                              which: str, eps: float = 0.01, L: float | None = None,
                              ells: Sequence[int] | None = None, origin: int = 0) -> AuditReport:
    """Implied constant ``C = ln(LHS / RHS_without_C) / (eps q_n)`` per ``ell``.

    ``thm61``: r_{l+eta} <= e^{C eps q + beta q}(e^{-L k} r_l + e^{-Lq + Lk} r_{l+1})
    ``thm62``: r_l <= e^{C eps q + 3 beta q}(e^{-Lq} r_{l+1} + e^{-Lq + Lk} r_{l-1+eta})
    ``thm63``: r_l <= e^{C eps q - L q + beta q}(r_{l-1} + r_{l+1})
    """
    L = math.log(profile.lam) if L is None else L
    rt = resonance_amplitudes(profile, table, phase, n, eps, ells, origin=origin)
    q, kj = rt.q_n, rt.k_j
    beta = math.log(table.q(n + 1)) / q
    if which in ("thm61", "thm62") and kj is None:
        raise DomainError(f"{which} needs the resonant parity at n = {n}")
    if which == "thm63" and kj is not None:
        raise DomainError("thm63 needs the non-resonant parity")
    rep = AuditReport(which, n, eps)
    for l in rt.ells:
        if which == "thm61":
            need = (l, l + 1)
            if not all(x in rt.log_r for x in need):
                continue
            lhs = rt.log_eta[l]
            rhs = beta * q + _logsumexp(-L * kj + rt.log_r[l], -L * q + L * kj + rt.log_r[l + 1])
        elif which == "thm62":
            if l == 0 or l + 1 not in rt.log_r or l - 1 not in rt.log_eta:
                continue
            lhs = rt.log_r[l]
            rhs = 3 * beta * q + _logsumexp(-L * q + rt.log_r[l + 1], -L * q + L * kj + rt.log_eta[l - 1])
        elif which == "thm63":
            if l == 0 or l - 1 not in rt.log_r or l + 1 not in rt.log_r:
                continue
            lhs = rt.log_r[l]
            rhs = -L * q + beta * q + _logsumexp(rt.log_r[l - 1], rt.log_r[l + 1])
        else:
            raise DomainError(f"unknown audit {which!r}")
        if rhs == -math.inf:
            rep.flagged += 1
            rep.rows.append({"ell": l, "C_implied": math.inf if lhs > -math.inf else -math.inf,
                             "vacuous": True})
            continue
        rep.rows.append({"ell": l, "lhs": lhs, "rhs_no_C": rhs,
                         "C_implied": (lhs - rhs) / (eps * q)})
    return rep
