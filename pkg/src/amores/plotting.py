"""Figures written next to the CSV/JSON artifacts (Agg backend, PNG)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: str | Path, meta: dict | None) -> Path:
    info = {"Software": None}
    if meta:
        info["Description"] = " ".join(f"{k}={v}" for k, v in sorted(meta.items()))
    fig.savefig(path, dpi=120, metadata=info)
    plt.close(fig)
    return Path(path)


def plot_profile(sites: np.ndarray, log_abs: np.ndarray, path, resonant: np.ndarray | None = None,
                 slope: float | None = None, peak: int = 0, title: str = "", meta=None) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(sites, log_abs, lw=0.8, color="k", label=r"$\ln|\phi(n)|$")
    if resonant is not None and resonant.any():
        ax.plot(sites[resonant], log_abs[resonant], ".", ms=2, color="tab:red", label="resonant sites")
    if slope is not None:
        ax.plot(sites, -slope * np.abs(sites - peak), "--", lw=0.8, color="tab:blue",
                label=f"slope {slope:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\ln|\phi|$")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7, loc="lower center")
    fig.tight_layout()
    return _save(fig, path, meta)


def plot_lyapunov(thetas: np.ndarray, values: np.ndarray, L_ref: float, path, title: str = "",
                  meta=None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    order = np.argsort(thetas)
    ax.plot(thetas[order], values[order], "o-", ms=3, lw=0.8)
    ax.axhline(L_ref, color="tab:red", lw=0.8, ls="--", label=r"$\ln\lambda$")
    ax.set_xlabel(r"$\theta$")
    ax.set_ylabel(r"$\frac{1}{k}\ln\|A_k(\theta)\|$")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path, meta)


def plot_lag(sites: Sequence[int], lag: np.ndarray, bound: float, path, title: str = "",
             meta=None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(sites, lag, ".", ms=3)
    ax.axhline(bound, color="tab:red", lw=0.8, ls="--", label="bound")
    ax.set_xlabel("m")
    ax.set_ylabel(r"Lag$_m$")
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path, meta)
