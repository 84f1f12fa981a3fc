"""Experiment configuration (TOML) and its provenance hash."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError
from .io import parse_rat, rat
from .phase import ETA_MAX


@dataclass(frozen=True)
class ExperimentConfig:
    alpha_rule: str
    depth: int
    a0: int = 0
    eta: Fraction = Fraction(1, 100)
    J: int = 2
    relaxed: bool = False
    anchor_cap: int = 10**6
    verify_cap: int = 100_000
    verify_j: int | None = None          # None: deepest constructed j
    cocycle_lambda: str = "3"
    cocycle_k: int = 10_000
    cocycle_samples: int = 64
    precision_bits: int = 53
    spectral_lambda: str = "7.38905609893065"
    N: tuple[int, ...] = (2000,)
    eps: Fraction = Fraction(1, 100)
    ell_max: int = 8
    claim_eps: Fraction = Fraction(1, 10)
    claim_ell: int = 1
    output_dir: str = "out"
    figures: bool = True

    def __post_init__(self):
        object.__setattr__(self, "eta", parse_rat(self.eta))
        object.__setattr__(self, "eps", parse_rat(self.eps))
        object.__setattr__(self, "claim_eps", parse_rat(self.claim_eps))
        object.__setattr__(self, "N", tuple(int(n) for n in self.N))

    def validate(self) -> "ExperimentConfig":
        if not 0 < self.eta:
            raise ValidationError("eta must be positive")
        if self.eta > ETA_MAX and not self.relaxed:
            raise ValidationError(
                f"eta = {rat(self.eta)} violates 0 < eta <= 1/100; set relaxed = true to override")
        if self.depth < 1 or self.J < 1:
            raise ValidationError("depth and J must be >= 1")
        if not self.N or min(self.N) < 1:
            raise ValidationError("N list must hold positive integers")
        for name in ("cocycle_lambda", "spectral_lambda"):
            try:
                float(Fraction(getattr(self, name)))
            except (ValueError, ZeroDivisionError) as exc:
                raise ValidationError(f"{name} is not a number") from exc
        return self

    @property
    def lam_cocycle(self) -> float:
        return float(Fraction(self.cocycle_lambda))

    @property
    def lam_spectral(self) -> float:
        return float(Fraction(self.spectral_lambda))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("eta", "eps", "claim_eps"):
            d[k] = rat(d[k])
        d["N"] = list(self.N)
        return d

    def canonical(self) -> str:
        d = self.to_dict()
        # where artifacts land and whether figures are drawn do not change results
        d.pop("output_dir")
        d.pop("figures")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


_SECTIONS = {
    "alpha": {"rule": "alpha_rule", "depth": "depth", "a0": "a0"},
    "phase": {"eta": "eta", "J": "J", "relaxed": "relaxed", "anchor_cap": "anchor_cap"},
    "verify": {"cap": "verify_cap", "j": "verify_j"},
    "cocycle": {"lambda": "cocycle_lambda", "k": "cocycle_k", "samples": "cocycle_samples",
                "precision_bits": "precision_bits"},
    "spectral": {"lambda": "spectral_lambda", "N": "N", "eps": "eps", "ell_max": "ell_max"},
    "claims": {"eps": "claim_eps", "ell": "claim_ell"},
    "output": {"dir": "output_dir", "figures": "figures"},
}


def from_mapping(data: dict) -> ExperimentConfig:
    kw = {}
    for sec, keys in _SECTIONS.items():
        block = data.get(sec, {})
        unknown = set(block) - set(keys)
        if unknown:
            raise ValidationError(f"unknown keys in [{sec}]: {sorted(unknown)}")
        for k, attr in keys.items():
            if k in block:
                kw[attr] = block[k]
    extra = set(data) - set(_SECTIONS)
    if extra:
        raise ValidationError(f"unknown sections: {sorted(extra)}")
    if "alpha_rule" not in kw or "depth" not in kw:
        raise ValidationError("[alpha] needs rule and depth")
    for k in ("cocycle_lambda", "spectral_lambda"):
        if k in kw:
            kw[k] = str(kw[k])
    try:
        return ExperimentConfig(**kw).validate()
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return from_mapping(data)


def shipped_config_path(name: str = "desk_case1") -> Path:
    return Path(str(resources.files("amores") / "data" / f"{name}.toml"))
