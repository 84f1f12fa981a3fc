"""Stage functions shared by the CLI subcommands and the end-to-end run.

Each stage writes its artifact and returns ``(path, digest, payload)``. JSON
artifacts carry a ``meta`` block and CSV files a ``#`` header with the config
hash, tool version and stage name; the convergent table is a bare array, so
its provenance lives in the manifest only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .cocycle import CocycleParams, check_claims, lyapunov_estimate
from .config import ExperimentConfig
from .contfrac import ConvergentTable, build_table
from .dioph import AlphaEnclosure, verify_prop41
from .errors import AmoresError, DomainError
from .io import rat, report_to_dict, sha256_bytes, table_to_json, write_csv, write_json
from .phase import PhaseConstructionState, construct_theta, delta_of_construction
from .spectral import (OperatorWindow, audit_decay_lemma, audit_resonant_recursions,
                       decay_slope, eigenvalues, profile_nearest, resonance_amplitudes,
                       resonant_j)

log = logging.getLogger(__name__)

EXACT, FLOAT = "exact", "float"


def meta(config_hash: str, stage: str) -> dict:
    return {"config_hash": config_hash, "tool_version": __version__, "stage": stage}


@dataclass
class Artifact:
    name: str
    stage: str
    kind: str
    sha256: str


@dataclass
class RunResult:
    artifacts: list[Artifact] = field(default_factory=list)
    figures: list[Artifact] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def exact_digest(self) -> str:
        parts = sorted(f"{a.name}:{a.sha256}" for a in self.artifacts if a.kind == EXACT)
        return sha256_bytes("\n".join(parts).encode())


class StageError(AmoresError):
    """Wraps a stage failure with the stage name; keeps the original exit code."""

    def __init__(self, stage: str, cause: AmoresError):
        super().__init__(f"stage {stage} failed [{cause.code}]: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
        self.code = cause.code


# -- stages -----------------------------------------------------------------

def stage_alpha(rule: str, depth: int, out: Path, a0: int = 0) -> tuple[ConvergentTable, str]:
    table = build_table(rule, depth, a0)
    table.check_invariants()
    digest = write_json(out, table_to_json(table))
    return table, digest


def stage_theta(table: ConvergentTable, eta, J: int, relaxed: bool, out: Path, chash: str,
                anchor_cap: int = 10**6, case: str | None = None, j0: int | None = None
                ) -> tuple[PhaseConstructionState, str]:
    state = construct_theta(table, eta, J, relaxed=relaxed, anchor_cap=anchor_cap, case=case, j0=j0)
    digest = write_json(out, {"phase": state.to_dict()}, meta(chash, "theta"))
    return state, digest


def stage_verify(table: ConvergentTable, state: PhaseConstructionState, j: int | None, cap: int,
                 out: Path, chash: str) -> tuple[dict, str]:
    j = state.j_values[-1] if j is None else j
    reports = verify_prop41(table, state, j, cap=cap)
    payload = {"j": j, "cap": cap, "ok": all(r.ok for r in reports),
               "clauses": [report_to_dict(r) for r in reports]}
    return payload, write_json(out, payload, meta(chash, "verify"))


def mid_spectrum_energy(lam: float, theta: Fraction, alpha: Fraction, N: int) -> float:
    ev = eigenvalues(OperatorWindow(N, lam, theta, alpha))
    return float(ev[len(ev) // 2])


def stage_cocycle_le(table: ConvergentTable, theta: Fraction, lam: float, k: int, samples: int,
                     out: Path, chash: str, N: int = 2000, energy: float | None = None,
                     figure: Path | None = None) -> tuple[dict, str]:
    alpha = table.convergent(table.depth)
    E = mid_spectrum_energy(lam, theta, alpha, N) if energy is None else float(energy)
    params = CocycleParams.from_table(table, lam, E, theta)
    est = lyapunov_estimate(params, k, samples)
    rows = sorted(zip(est.thetas.tolist(), est.values.tolist()))
    m = {**meta(chash, "cocycle"), "E": repr(E), "lambda": repr(lam), "k": k}
    digest = write_csv(out, ["theta", "log_norm_over_k"], rows, m)
    summary = {"E": E, "L_avg": est.L_avg, "L_sup": est.L_sup, "stderr": est.stderr,
               "ln_lambda": math.log(lam), "k": k, "samples": samples}
    if figure is not None:
        from .plotting import plot_lyapunov
        plot_lyapunov(est.thetas, est.values, math.log(lam), figure,
                      f"lambda={lam:.4g}, E={E:.4f}, k={k}", meta(chash, "cocycle"))
    return summary, digest


def largest_index(table: ConvergentTable, limit: int, parity: int | None = None,
                  need_next: bool = True) -> int | None:
    top = table.depth - 1 if need_next else table.depth
    ns = [n for n in range(1, top + 1) if table.q(n) <= limit and (parity is None or n % 2 == parity)]
    return max(ns) if ns else None


def resonant_mask(sites: np.ndarray, q: int, eps: Fraction, kj: int | None) -> np.ndarray:
    r = math.floor(10 * eps * q)
    d = np.abs(((sites + q // 2) % q) - q // 2)
    mask = d <= r
    if kj is not None:
        dk = np.abs(((sites - kj + q // 2) % q) - q // 2)
        mask |= dk <= r
    return mask


def stage_spectral(table: ConvergentTable, state: PhaseConstructionState, lam: float, N: int,
                   eps: Fraction, out: Path, chash: str, n: int | None = None,
                   figure: Path | None = None):
    alpha = table.convergent(table.depth)
    window = OperatorWindow(N, lam, state.midpoint, alpha)
    prof = profile_nearest(window, 0)
    n = largest_index(table, N // 4) if n is None else n
    q = table.q(n)
    j = resonant_j(state, n)
    kj = state.k(j) if j is not None else None
    mask = resonant_mask(prof.sites, q, eps, kj)
    rows = [(int(s), float(v), int(m)) for s, v, m in zip(prof.sites, prof.log_profile, mask)]
    m = {**meta(chash, "spectral"), "E": repr(prof.eigenvalue), "lambda": repr(lam), "N": N,
         "n": n, "q_n": q, "peak": prof.peak}
    digest = write_csv(out, ["n", "log_abs_phi", "is_resonant_site"], rows, m)
    fit = None
    try:
        f = decay_slope(prof)
        fit = {"slope": f.slope, "ci": list(f.ci), "r2": f.r2, "points": f.points}
    except DomainError as exc:
        fit = {"error": str(exc)}
    if figure is not None:
        from .plotting import plot_profile
        plot_profile(prof.sites, prof.log_profile, figure, mask,
                     fit.get("slope") if "slope" in fit else None, prof.peak,
                     f"lambda={lam:.4g}, N={N}, E={prof.eigenvalue:.4f}, q_{n}={q}",
                     meta(chash, "spectral"))
    summary = {"E": prof.eigenvalue, "peak": prof.peak, "residual": prof.residual, "n": n,
               "q_n": q, "k_j": kj, "fit": fit, "ln_lambda": math.log(lam)}
    return prof, summary, digest


def stage_audits(table: ConvergentTable, state: PhaseConstructionState, prof, n: int,
                 eps: Fraction, ell_max: int, claim_eps: Fraction, claim_ell: int,
                 out: Path, chash: str, figure: Path | None = None) -> tuple[dict, str]:
    q = table.q(n)
    j = resonant_j(state, n)
    kj = state.k(j) if j is not None else 0
    radius = math.floor(10 * eps * q)
    ells = [l for l in range(-ell_max, ell_max + 1)
            if l * q - radius >= -prof.N and (l + 1) * q + kj + radius <= prof.N]
    payload: dict = {"n": n, "q_n": q, "ells": ells}
    rt = resonance_amplitudes(prof, table, state, n, float(eps), ells)
    payload["r_table"] = {"log_r": {str(k): v for k, v in rt.log_r.items()},
                          "log_r_eta": {str(k): v for k, v in rt.log_r_eta.items()},
                          "ell_limit_from_b": rt.ell_limit, "k_j": rt.k_j}
    lem = audit_decay_lemma(prof, table, state, n, float(eps), ells=ells)
    payload["lemma51"] = {"rows": len(lem.rows), "flagged": lem.flagged, "skipped": lem.skipped,
                          "min_log_margin": lem.min_margin}
    kinds = ["thm61", "thm62"] if rt.k_j is not None else ["thm63"]
    for kind in kinds:
        rep = audit_resonant_recursions(prof, table, state, n, kind, float(eps), ells=ells)
        cs = [c for c in rep.c_values if math.isfinite(c)]
        payload[kind] = {**rep.to_dict(), "C_max": max(cs) if cs else None}
    dc = delta_of_construction(state, table)
    payload["delta"] = {"rows": [r.__dict__ for r in dc.rows], "delta_hat": dc.delta,
                        "bracket": list(dc.bracket), "beta_hat": dc.beta_hat, "ratio": dc.ratio}
    # Lag bound on the non-resonant scale below 60
    parity = 0 if state.case_tag == "Case1" else 1
    nc = largest_index(table, 60, parity)
    if nc is not None:
        try:
            cr = check_claims(table, state, nc, "C3", claim_eps, claim_ell)
            payload["claim3"] = {"n": nc, "q_n": cr.q_n, "bound": cr.bound, "max_lag": cr.max_lag,
                                 "ok": cr.ok, "max_ratio": cr.max_ratio}
            if figure is not None:
                from .plotting import plot_lag
                plot_lag(cr.sites, cr.lag, cr.bound, figure,
                         f"Lag_m on I_1 u I_2, n={nc}, q_n={cr.q_n}", meta(chash, "audits"))
        except AmoresError as exc:
            payload["claim3"] = {"n": nc, "error": str(exc)}
    return payload, write_json(out, payload, meta(chash, "audits"))


# -- orchestration ----------------------------------------------------------

def run_pipeline(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                 figures: bool | None = None) -> RunResult:
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    figures = cfg.figures if figures is None else figures
    chash = cfg.hash
    res = RunResult()
    fig = (lambda name: out / name) if figures else (lambda name: None)

    def run(stage, fn):
        try:
            return fn()
        except AmoresError as exc:
            _write_manifest(out, cfg, res, failed=(stage, exc))
            raise StageError(stage, exc) from exc

    table, d = run("alpha", lambda: stage_alpha(cfg.alpha_rule, cfg.depth, out / "table.json", cfg.a0))
    res.artifacts.append(Artifact("table.json", "alpha", EXACT, d))
    state, d = run("theta", lambda: stage_theta(table, cfg.eta, cfg.J, cfg.relaxed, out / "phase.json",
                                                chash, cfg.anchor_cap))
    res.artifacts.append(Artifact("phase.json", "theta", EXACT, d))
    ver, d = run("verify", lambda: stage_verify(table, state, cfg.verify_j, cfg.verify_cap,
                                                out / "prop41.json", chash))
    res.artifacts.append(Artifact("prop41.json", "verify", EXACT, d))
    N = cfg.N[0]
    le, d = run("cocycle", lambda: stage_cocycle_le(table, state.midpoint, cfg.lam_cocycle, cfg.cocycle_k,
                                                    cfg.cocycle_samples, out / "le.csv", chash, N,
                                                    figure=fig("le.png")))
    res.artifacts.append(Artifact("le.csv", "cocycle", FLOAT, d))
    prof, sp, d = run("spectral", lambda: stage_spectral(table, state, cfg.lam_spectral, N, cfg.eps,
                                                         out / "profiles.csv", chash,
                                                         figure=fig("profile.png")))
    res.artifacts.append(Artifact("profiles.csv", "spectral", FLOAT, d))
    au, d = run("audits", lambda: stage_audits(table, state, prof, sp["n"], cfg.eps, cfg.ell_max,
                                               cfg.claim_eps, cfg.claim_ell, out / "audit.json",
                                               chash, figure=fig("lag.png")))
    res.artifacts.append(Artifact("audit.json", "audits", FLOAT, d))
    if figures:
        for name in ("le.png", "profile.png", "lag.png"):
            p = out / name
            if p.exists():
                res.figures.append(Artifact(name, "figures", "figure", sha256_bytes(p.read_bytes())))
    res.summary = {"case": state.case_tag, "j0": state.j0, "k_seq": [str(k) for k in state.k_seq],
                   "theta": [rat(x) for x in state.theta], "prop41_ok": ver["ok"],
                   "lyapunov": le, "spectral": sp,
                   "claim3": au.get("claim3")}
    _write_manifest(out, cfg, res)
    return res


def _write_manifest(out: Path, cfg: ExperimentConfig, res: RunResult, failed=None) -> None:
    manifest = {
        "config_hash": cfg.hash,
        "tool_version": __version__,
        "config": cfg.to_dict(),
        "artifacts": [a.__dict__ for a in res.artifacts],
        "exact_digest": res.exact_digest,
        "figures": [a.__dict__ for a in res.figures],
        "status": "ok" if failed is None else "failed",
    }
    if failed is not None:
        stage, exc = failed
        manifest["error"] = {"stage": stage, "code": exc.code, "exit_code": exc.exit_code,
                             "message": str(exc)}
    else:
        manifest["summary"] = res.summary
    write_json(out / "manifest.json", manifest)
