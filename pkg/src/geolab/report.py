"""Report records and their JSON / text serializations.

JSON output is key-sorted, ASCII-only and uses Python's shortest
round-trip float repr, so it does not depend on locale.  Non-finite
floats are written as the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
Two runs with identical inputs differ only in ``wall_time_s``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__

TOOL = "geolab"
SCHEMA_VERSION = 1

RESIDUAL = "residual"
VERDICT = "verdict"
VALUE = "value"
FLAG = "flag"


@dataclass
class Check:
    """One named record.  ``kind`` says which of the value fields is set:

    * residual: ``residual`` compared against ``threshold`` (passed iff ≤)
    * verdict:  ``verdict`` string with ``magnitude`` and ``threshold``
    * value:    a reported quantity in ``value`` (scalar or nested list)
    * flag:     a boolean in ``value``
    """

    name: str
    kind: str
    residual: float | None = None
    threshold: float | None = None
    verdict: str | None = None
    magnitude: float | None = None
    value: Any = None
    passed: bool | None = None
    witness: dict | None = None
    note: str | None = None

    def as_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        for key in ("residual", "threshold", "verdict", "magnitude", "value", "passed", "witness", "note"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        return d


def residual(name: str, value: float, threshold: float | None, witness: dict | None = None, note=None) -> Check:
    value = float(value)
    passed = None if threshold is None else bool(value <= threshold)
    return Check(name, RESIDUAL, residual=value, threshold=threshold, passed=passed, witness=witness, note=note)


def reported(name: str, value: Any, note: str | None = None) -> Check:
    return Check(name, VALUE, value=value, note=note)


def flag(name: str, value: bool, expected: bool | None = None, note: str | None = None) -> Check:
    passed = None if expected is None else bool(value) == expected
    return Check(name, FLAG, value=bool(value), passed=passed, note=note)


@dataclass
class Report:
    command: str
    spec_name: str
    input_digest: str
    parameters: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    wall_time_s: float = 0.0
    status: str = "ok"

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    @property
    def all_passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "tool": TOOL,
            "version": __version__,
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "spec": {"name": self.spec_name, "input_digest": self.input_digest},
            "parameters": self.parameters,
            "checks": [c.as_dict() for c in self.checks],
            "all_passed": self.all_passed,
            "status": self.status,
            "wall_time_s": self.wall_time_s,
        }

    def to_json(self) -> str:
        return dumps(self.as_dict())

    def to_text(self) -> str:
        lines = [
            f"{TOOL} {__version__}  {self.command}  {self.spec_name}",
            f"input {self.input_digest}",
        ]
        for k in sorted(self.parameters):
            lines.append(f"  {k} = {_plain(self.parameters[k])}")
        lines.append("")
        for c in self.checks:
            mark = {True: "ok  ", False: "FAIL", None: "    "}[c.passed]
            if c.kind == RESIDUAL:
                th = "" if c.threshold is None else f" (threshold {c.threshold:.1e})"
                body = f"{c.residual:.3e}{th}"
            elif c.kind == VERDICT:
                body = f"{c.verdict}  magnitude {c.magnitude:.3e} (threshold {c.threshold:.1e})"
            else:
                body = _short(c.value)
            extra = f"  at {_plain(c.witness)}" if c.witness else ""
            lines.append(f"{mark} {c.name:<34} {body}{extra}")
        lines.append("")
        lines.append(f"status {self.status}, wall time {self.wall_time_s:.3f} s")
        return "\n".join(lines) + "\n"


def _plain(v: Any) -> str:
    return json.dumps(sanitize(v), sort_keys=True)


def _short(v: Any) -> str:
    s = _plain(v)
    return s if len(s) <= 80 else s[:77] + "..."


def sanitize(v: Any) -> Any:
    """Convert numpy values and non-finite floats into JSON-safe values."""
    if isinstance(v, dict):
        return {str(k): sanitize(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [sanitize(x) for x in v]
    if isinstance(v, np.ndarray):
        return sanitize(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return 0.0 if x == 0 else x
    return v


def dumps(obj: Any) -> str:
    return json.dumps(sanitize(obj), sort_keys=True, indent=2, ensure_ascii=True, allow_nan=False) + "\n"


def strip_timing(text: str) -> dict:
    """Parse a JSON report and drop its wall-time field (for comparisons)."""
    d = json.loads(text)
    d.pop("wall_time_s", None)
    return d
