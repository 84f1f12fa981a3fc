"""Command line entry point.

Exit codes: 0 success, 2 validation/domain, 3 numeric, 4 resource/search,
5 construction failure, 1 anything else raised by the package.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .errors import AmoresError, ValidationError
from .io import dumps, parse_rat, rat, read_phase, read_table, write_json


def _frac(s: str) -> Fraction:
    try:
        return parse_rat(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {s!r}") from exc


def _print(obj) -> None:
    print(dumps(obj) if not isinstance(obj, str) else obj)


# -- handlers -----------------------------------------------------------------

def cmd_alpha_build(a) -> int:
    from .pipeline import stage_alpha
    table, digest = stage_alpha(a.rule, a.depth, Path(a.out), a.a0)
    _print({"out": a.out, "sha256": digest, "depth": table.depth, "q_last": str(table.q(table.depth))})
    return 0


def cmd_theta_construct(a) -> int:
    from .pipeline import stage_theta
    table = read_table(a.table)
    state, digest = stage_theta(table, a.eta, a.J, a.relaxed, Path(a.out), "cli",
                                a.anchor_cap, a.case, a.j0)
    _print({"out": a.out, "sha256": digest, "case": state.case_tag, "j0": state.j0,
            "k": [str(k) for k in state.k_seq], "theta": [rat(x) for x in state.theta]})
    return 0


def cmd_verify_prop41(a) -> int:
    from .pipeline import stage_verify
    table, state = read_table(a.table), read_phase(a.phase)
    payload, _ = stage_verify(table, state, a.j, a.cap, Path(a.out), "cli")
    for c in payload["clauses"]:
        print(f"{c['item']}: tested={c['tested']} violations={len(c['violations'])} "
              f"min_ratio={c['min_ratio_float']} {'ok' if c['ok'] else 'VIOLATED'}")
    return 0 if payload["ok"] else 3


def cmd_cocycle_le(a) -> int:
    from .pipeline import stage_cocycle_le
    table = read_table(a.table)
    theta = read_phase(a.phase).midpoint if a.phase else a.theta
    summary, _ = stage_cocycle_le(table, theta, a.lam, a.k, a.samples, Path(a.out), "cli",
                                  a.N, a.E, Path(a.figure) if a.figure else None)
    _print(summary)
    return 0


def cmd_cocycle_lag(a) -> int:
    from .cocycle import lagrange_terms
    table = read_table(a.table)
    alpha = table.convergent(table.depth)
    theta = read_phase(a.phase).midpoint if a.phase else a.theta
    thetas = [theta + m * alpha for m in range(a.m0, a.m0 + a.count)]
    res = lagrange_terms(thetas, a.grid)
    _print({"m0": a.m0, "count": a.count, "max_lag": float(res.lag.max()),
            "lag": [float(x) for x in res.lag]})
    return 0


def cmd_cocycle_claims(a) -> int:
    from .cocycle import check_claims
    from .pipeline import meta
    table, state = read_table(a.table), read_phase(a.phase)
    rep = check_claims(table, state, a.n, a.claim, a.eps, a.ell, a.grid)
    payload = {"claim": rep.claim, "n": rep.n, "q_n": rep.q_n, "bound": rep.bound,
               "max_lag": rep.max_lag, "max_ratio": rep.max_ratio, "beta_ratio": rep.beta_ratio,
               "ok": rep.ok, "s": rep.s, "n0": rep.n0, "nodes": len(rep.sites)}
    if a.out:
        write_json(a.out, {**payload, "sites": list(rep.sites), "lag": rep.lag.tolist()},
                   meta("cli", "claims"))
    if a.figure:
        from .plotting import plot_lag
        plot_lag(rep.sites, rep.lag, rep.bound, a.figure, f"{rep.claim}, n={rep.n}")
    _print(payload)
    return 0 if rep.ok else 3


def cmd_spectral_localize(a) -> int:
    from .pipeline import stage_spectral
    table, state = read_table(a.table), read_phase(a.phase)
    _, summary, _ = stage_spectral(table, state, a.lam, a.N, a.eps, Path(a.out), "cli", a.n,
                                   Path(a.figure) if a.figure else None)
    _print(summary)
    return 0


def cmd_spectral_audit(a) -> int:
    from .pipeline import largest_index, stage_audits
    from .spectral import OperatorWindow, profile_nearest
    table, state = read_table(a.table), read_phase(a.phase)
    prof = profile_nearest(OperatorWindow(a.N, a.lam, state.midpoint, table.convergent(table.depth)), 0)
    n = a.n if a.n is not None else largest_index(table, a.N // 4)
    if n is None:
        raise ValidationError("no scale q_n <= N/4 in the table")
    payload, _ = stage_audits(table, state, prof, n, a.eps, a.ell_max, a.claim_eps, a.claim_ell,
                              Path(a.out), "cli", Path(a.figure) if a.figure else None)
    brief = {k: v for k, v in payload.items() if k not in ("r_table", "delta")}
    for kind in ("thm61", "thm62", "thm63"):
        if kind in brief:
            brief[kind] = {"flagged": brief[kind]["flagged"], "C_max": brief[kind]["C_max"]}
    _print(brief)
    return 0


def cmd_run(a) -> int:
    from .config import load_config, shipped_config_path
    from .pipeline import run_pipeline
    path = a.config if a.config else shipped_config_path(a.shipped)
    cfg = load_config(path)
    res = run_pipeline(cfg, a.out, figures=False if a.no_figures else None)
    out = Path(a.out or cfg.output_dir)
    s = res.summary
    print(f"artifacts written to {out}")
    print(f"config_hash  {cfg.hash}")
    print(f"exact_digest {res.exact_digest}")
    print(f"case={s['case']} j0={s['j0']} k={s['k_seq']} prop41_ok={s['prop41_ok']}")
    le = s["lyapunov"]
    print(f"L_avg={le['L_avg']:.6f} ln(lambda)={le['ln_lambda']:.6f} at E={le['E']:.6f}")
    fit = s["spectral"]["fit"]
    if "slope" in fit:
        print(f"decay slope={fit['slope']:.4f} ci=[{fit['ci'][0]:.4f}, {fit['ci'][1]:.4f}] "
              f"ln(lambda)={s['spectral']['ln_lambda']:.4f}")
    if s.get("claim3") and "max_lag" in s["claim3"]:
        c = s["claim3"]
        print(f"claim3 n={c['n']} max_lag={c['max_lag']:.3f} bound={c['bound']:.3f} ok={c['ok']}")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="amores", description="Almost Mathieu resonance experiments")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="group", required=True)

    g = sub.add_parser("alpha", help="continued fractions").add_subparsers(dest="cmd", required=True)
    s = g.add_parser("build", help="build the convergent table")
    s.add_argument("--rule", required=True, help="const:<a> | beta:<mu> | list:<file-or-comma-list>")
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--a0", type=int, default=0)
    s.add_argument("--out", default="table.json")
    s.set_defaults(fn=cmd_alpha_build)

    g = sub.add_parser("theta", help="phase construction").add_subparsers(dest="cmd", required=True)
    s = g.add_parser("construct")
    s.add_argument("--table", required=True)
    s.add_argument("--eta", type=_frac, default=Fraction(1, 100))
    s.add_argument("--J", type=int, default=2)
    s.add_argument("--relaxed", action="store_true", help="allow eta > 1/100 and the 40/eta threshold")
    s.add_argument("--case", choices=["Case1", "Case2"])
    s.add_argument("--j0", type=int)
    s.add_argument("--anchor-cap", type=int, default=10**6)
    s.add_argument("--out", default="phase.json")
    s.set_defaults(fn=cmd_theta_construct)

    g = sub.add_parser("verify", help="small-denominator checks").add_subparsers(dest="cmd", required=True)
    s = g.add_parser("prop41")
    s.add_argument("--table", required=True)
    s.add_argument("--phase", required=True)
    s.add_argument("--j", type=int)
    s.add_argument("--cap", type=int, default=100_000)
    s.add_argument("--out", default="prop41.json")
    s.set_defaults(fn=cmd_verify_prop41)

    g = sub.add_parser("cocycle", help="transfer matrices").add_subparsers(dest="cmd", required=True)
    s = g.add_parser("le", help="Lyapunov exponent estimate")
    s.add_argument("--table", required=True)
    s.add_argument("--phase")
    s.add_argument("--theta", type=_frac, default=Fraction(0))
    s.add_argument("--lam", type=float, default=3.0)
    s.add_argument("--E", type=float, help="energy (default: mid-spectrum of the N-window)")
    s.add_argument("--N", type=int, default=2000)
    s.add_argument("--k", type=int, default=10_000)
    s.add_argument("--samples", type=int, default=64)
    s.add_argument("--out", default="le.csv")
    s.add_argument("--figure")
    s.set_defaults(fn=cmd_cocycle_le)
    s = g.add_parser("lag", help="Lagrange terms for theta + m alpha")
    s.add_argument("--table", required=True)
    s.add_argument("--phase")
    s.add_argument("--theta", type=_frac, default=Fraction(0))
    s.add_argument("--m0", type=int, default=0)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--grid", type=int, default=4096)
    s.set_defaults(fn=cmd_cocycle_lag)
    s = g.add_parser("claims", help="Lagrange bounds on I_1 u I_2")
    s.add_argument("--table", required=True)
    s.add_argument("--phase", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--claim", choices=["C1", "C2", "C3"], required=True)
    s.add_argument("--eps", type=_frac, default=Fraction(1, 10))
    s.add_argument("--ell", type=int, default=1)
    s.add_argument("--grid", type=int, default=4096)
    s.add_argument("--out")
    s.add_argument("--figure")
    s.set_defaults(fn=cmd_cocycle_claims)

    g = sub.add_parser("spectral", help="eigenvectors and audits").add_subparsers(dest="cmd", required=True)
    for name, fn, out, fig in (("localize", cmd_spectral_localize, "profiles.csv", None),
                               ("audit", cmd_spectral_audit, "audit.json", None)):
        s = g.add_parser(name)
        s.add_argument("--table", required=True)
        s.add_argument("--phase", required=True)
        s.add_argument("--lam", type=float, default=math.e ** 2)
        s.add_argument("--N", type=int, default=2000)
        s.add_argument("--n", type=int, help="scale index (default: largest q_n <= N/4)")
        s.add_argument("--eps", type=_frac, default=Fraction(1, 100))
        s.add_argument("--out", default=out)
        s.add_argument("--figure", default=fig)
        s.set_defaults(fn=fn)
        if name == "audit":
            s.add_argument("--ell-max", type=int, default=8)
            s.add_argument("--claim-eps", type=_frac, default=Fraction(1, 10))
            s.add_argument("--claim-ell", type=int, default=1)

    s = sub.add_parser("run", help="end-to-end pipeline from a TOML config")
    s.add_argument("--config", help="TOML file (default: a shipped config)")
    s.add_argument("--shipped", default="desk_case1", help="name of a shipped config")
    s.add_argument("--out", help="output directory (overrides [output] dir)")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(fn=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.fn(a)
    except AmoresError as exc:
        stage = getattr(exc, "stage", None)
        where = f" (stage {stage})" if stage else ""
        print(f"amores: error [{exc.code}]{where}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"amores: error [validation]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
