"""Artifact serialization: JSON with rationals as ``"num/den"``, CSV with a
``#`` provenance header, and sha256 digests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

from .contfrac import ConvergentRow, ConvergentTable
from .dioph import ResonanceReport
from .errors import ValidationError
from .phase import PhaseConstructionState


def rat(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rat(s: str | int) -> Fraction:
    try:
        return Fraction(str(s).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"not a rational: {s!r}") from exc


def _default(o):
    if isinstance(o, Fraction):
        return rat(o)
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(o, float) and not math.isfinite(o):
        return "inf" if o > 0 else ("-inf" if o < 0 else "nan")
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def dumps(obj: Any) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_default) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def write_json(path: str | Path, obj: Any, meta: dict | None = None) -> str:
    """Write canonical JSON; dict payloads get a ``meta`` key. Returns the file digest."""
    if meta is not None and isinstance(obj, dict):
        obj = {**obj, "meta": meta}
    text = dumps(obj)
    Path(path).write_text(text)
    return sha256_bytes(text.encode())


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence],
              meta: dict | None = None, float_fmt: str = "{:.12g}") -> str:
    fmt = lambda v: float_fmt.format(v) if isinstance(v, float) else v
    with open(path, "w", newline="") as fh:
        for k, v in sorted((meta or {}).items()):
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return sha256_file(path)


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


# -- domain objects ----------------------------------------------------------

def table_to_json(table: ConvergentTable) -> list[dict]:
    return [{"n": r.n, "a": str(r.a), "p": str(r.p), "q": str(r.q)} for r in table.rows]


def table_from_json(data: list[dict]) -> ConvergentTable:
    try:
        rows = tuple(ConvergentRow(int(d["n"]), int(d["a"]), int(d["p"]), int(d["q"])) for d in data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed convergent table: {exc}") from exc
    table = ConvergentTable(rows)
    try:
        table.check_invariants()
    except AssertionError as exc:
        raise ValidationError(f"convergent table fails its invariants at row {exc}") from exc
    return table


def read_table(path: str | Path) -> ConvergentTable:
    data = read_json(path)
    if isinstance(data, dict):
        data = data["rows"]
    return table_from_json(data)


def read_phase(path: str | Path) -> PhaseConstructionState:
    d = read_json(path)
    return PhaseConstructionState.from_dict(d.get("phase", d))


def report_to_dict(r: ResonanceReport) -> dict:
    return {
        "item": r.item,
        "index": r.index,
        "tested": r.tested_count,
        "bound": rat(r.bound),
        "ok": r.ok,
        "min_ratio": rat(r.min_ratio) if r.min_ratio is not None else None,
        "min_ratio_float": float(r.min_ratio) if r.min_ratio is not None else None,
        "argmin_k": str(r.argmin_k) if r.argmin_k is not None else None,
        "ranges": {k: [str(v) for v in vals] for k, vals in r.ranges.items()},
        "violations": [{"k": str(v.k), "d_lo": rat(v.d_lo), "d_hi": rat(v.d_hi),
                        "bound": rat(v.bound)} for v in r.violations],
    }
