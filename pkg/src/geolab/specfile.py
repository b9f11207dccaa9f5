"""Loading ``.spec`` files (TOML with quoted expression strings).

A spec file has a ``[metric]`` table, an optional ``[metric.domain]``
sampling box, optional ``[fields.NAME]`` vector fields, an optional
``[axis]`` table (a one-variable matrix for obstruction runs) and an
optional ``[run]`` table of defaults.  See the README for the grammar.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import tomli

from . import expr as ex
from .errors import ExprSyntaxError, SpecFileError
from .penrose.brinkmann import AxisMetric, Grid
from .sampling import sample_box
from .tensor import SIGNATURES, MetricSpec
from .wick import VectorFieldSpec

CATALOG_PACKAGE = "geolab.catalog"
SPEC_SUFFIX = ".spec"
DEFAULT_BOX = (-1.0, 1.0)

_RUN_KEYS = {"grid", "samples", "seed", "threshold", "thresholds", "lambda", "eps", "at", "mode", "field"}
_TOP_KEYS = {"metric", "fields", "axis", "run"}
_STRING_RE = re.compile(r'"((?:[^"\\]|\\.)*)"|\'([^\']*)\'')


@dataclass
class RunDefaults:
    grid: str | None = None
    samples: int | None = None
    seed: int | None = None
    threshold: float | None = None
    thresholds: dict[str, float] = field(default_factory=dict)
    lam: float | None = None
    eps: list[float] | None = None
    at: dict[str, float] | None = None
    mode: str | None = None
    field: str | None = None


@dataclass
class SpecFile:
    name: str
    source: str
    digest: str
    metric: MetricSpec
    domain: dict[str, tuple[float, float]]
    fields: dict[str, VectorFieldSpec]
    axis: AxisMetric | None
    run: RunDefaults

    def box(self) -> dict[str, tuple[float, float]]:
        return {c: self.domain.get(c, DEFAULT_BOX) for c in self.metric.coords}


# ---------------------------------------------------------------------------
# Locating values in the raw text (for error positions).


class _Locator:
    """Maps the n-th quoted string after ``key =`` inside ``[section]`` to
    its (line, column), both 1-based."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def _section_start(self, section: str) -> int:
        pat = re.compile(r"^\s*\[\s*" + re.escape(section) + r"\s*\]\s*(#.*)?$")
        for i, line in enumerate(self.lines):
            if pat.match(line):
                return i
        return -1

    def key(self, section: str, key: str) -> tuple[int | None, int | None]:
        start = self._section_start(section)
        if start < 0:
            return None, None
        pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
        for i in range(start + 1, len(self.lines)):
            line = self.lines[i]
            if re.match(r"^\s*\[", line):
                break
            m = pat.match(line)
            if m:
                return i + 1, line.index(key) + 1
        return None, None

    def string(self, section: str, key: str, index: int) -> tuple[int | None, int | None]:
        line, _ = self.key(section, key)
        if line is None:
            return None, None
        seen = 0
        for i in range(line - 1, len(self.lines)):
            text = self.lines[i]
            if i == line - 1:
                offset = text.index("=") + 1
            else:
                if re.match(r"^\s*\[[^\]\"']*\]\s*$", text):
                    break
                offset = 0
            for m in _STRING_RE.finditer(text, offset):
                if seen == index:
                    return i + 1, m.start() + 2
                seen += 1
        return line, None


def _fail(msg: str, where: tuple[int | None, int | None] = (None, None)) -> SpecFileError:
    return SpecFileError(msg, *where)


# ---------------------------------------------------------------------------
# Parsing.


def _parse_entry(value: Any, names, loc: _Locator, section: str, key: str, index: int) -> ex.Expr:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise _fail(f"{section}.{key}: entries must be expression strings or numbers", loc.key(section, key))
    if not isinstance(value, str):
        if not math.isfinite(value):
            raise _fail(f"{section}.{key}: non-finite number", loc.key(section, key))
        return ex.num(float(value))
    try:
        return ex.parse(value, names)
    except ExprSyntaxError as err:
        line, col = loc.string(section, key, index)
        if col is not None:
            col += err.offset
        raise SpecFileError(f"{section}.{key}: {err}", line, col) from None


def _parse_matrix(rows: Any, names, loc: _Locator, section: str, key: str = "components"):
    """Full or lower-triangular matrix of expressions -> full symmetric tuple.

    An upper triangle, when present, must agree with the lower one (tree
    equality, or numeric agreement at a few sample points).
    """
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise _fail(f"{section}.{key} must be a list of rows", loc.key(section, key))
    n = len(rows)
    lengths = [len(r) for r in rows]
    lower = lengths == list(range(1, n + 1))
    if not lower and lengths != [n] * n:
        raise _fail(
            f"{section}.{key} must be square ({n}x{n}) or lower-triangular, got row lengths {lengths}",
            loc.key(section, key),
        )
    parsed = []
    index = 0
    for row in rows:
        out = []
        for v in row:
            out.append(_parse_entry(v, names, loc, section, key, index))
            index += 1
        parsed.append(out)
    full = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1):
            full[i][j] = full[j][i] = parsed[i][j]
    if not lower:
        for i in range(n):
            for j in range(i + 1, n):
                upper = parsed[i][j]
                if upper != full[i][j] and not _numerically_equal(upper, full[i][j], names):
                    raise _fail(
                        f"{section}.{key} is not symmetric: entry [{i}][{j}] differs from [{j}][{i}]",
                        loc.string(section, key, i * n + j),
                    )
    return tuple(tuple(r) for r in full)


def _numerically_equal(a: ex.Expr, b: ex.Expr, names, count: int = 5) -> bool:
    names = list(names)
    pts = sample_box({c: (0.1, 0.9) for c in names}, names, count, seed=12345)
    try:
        for p in pts:
            x, y = ex.evaluate(a, p), ex.evaluate(b, p)
            if abs(x - y) > 1e-12 * max(1.0, abs(x), abs(y)):
                return False
    except ArithmeticError:
        return False
    return True


def _interval(value: Any, what: str, where) -> tuple[float, float]:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise _fail(f"{what} must be a pair of numbers [lo, hi]", where)
    lo, hi = float(value[0]), float(value[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise _fail(f"{what} must satisfy lo <= hi", where)
    return lo, hi


def _parse_metric(doc: Mapping, loc: _Locator, default_name: str) -> tuple[MetricSpec, dict]:
    sec = doc.get("metric")
    if not isinstance(sec, dict):
        raise _fail("missing [metric] table")
    for key in ("coords", "components"):
        if key not in sec:
            raise _fail(f"[metric] is missing '{key}'", loc.key("metric", "coords") if key == "components" else (None, None))
    coords = sec["coords"]
    if not isinstance(coords, list) or not all(isinstance(c, str) for c in coords):
        raise _fail("metric.coords must be a list of names", loc.key("metric", "coords"))
    for c in coords:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", c) or c in ex.FUNCTIONS or c == "pi":
            raise _fail(f"invalid coordinate name {c!r}", loc.key("metric", "coords"))
    if len(set(coords)) != len(coords):
        raise _fail("metric.coords must be distinct", loc.key("metric", "coords"))
    if not 2 <= len(coords) <= 8:
        raise _fail("metric dimension must be between 2 and 8", loc.key("metric", "coords"))
    signature = sec.get("signature", "riemannian")
    if signature not in SIGNATURES:
        raise _fail(f"metric.signature must be one of {list(SIGNATURES)}", loc.key("metric", "signature"))
    comps = _parse_matrix(sec["components"], coords, loc, "metric")
    if len(comps) != len(coords):
        raise _fail(
            f"metric.components has {len(comps)} rows for {len(coords)} coordinates",
            loc.key("metric", "components"),
        )
    name = sec.get("name", default_name)
    if not isinstance(name, str):
        raise _fail("metric.name must be a string", loc.key("metric", "name"))
    metric = MetricSpec(tuple(coords), comps, signature, name)

    domain = {}
    raw_domain = sec.get("domain", {})
    if not isinstance(raw_domain, dict):
        raise _fail("[metric.domain] must be a table", loc.key("metric", "domain"))
    for c, v in raw_domain.items():
        if c not in coords:
            raise _fail(f"metric.domain names unknown coordinate {c!r}", loc.key("metric.domain", c))
        domain[c] = _interval(v, f"metric.domain.{c}", loc.key("metric.domain", c))
    unknown = set(sec) - {"name", "signature", "coords", "components", "domain"}
    if unknown:
        raise _fail(f"unknown keys in [metric]: {sorted(unknown)}", loc.key("metric", sorted(unknown)[0]))
    return metric, domain


def _parse_fields(doc: Mapping, metric: MetricSpec, loc: _Locator) -> dict[str, VectorFieldSpec]:
    out = {}
    raw = doc.get("fields", {})
    if not isinstance(raw, dict):
        raise _fail("[fields] must contain tables [fields.NAME]")
    for name, sec in raw.items():
        section = f"fields.{name}"
        if not isinstance(sec, dict) or "components" not in sec:
            raise _fail(f"[{section}] needs a 'components' list", loc.key(section, "components"))
        comps = sec["components"]
        if not isinstance(comps, list) or len(comps) != metric.n:
            raise _fail(
                f"{section}.components must list {metric.n} entries", loc.key(section, "components")
            )
        parsed = tuple(_parse_entry(v, metric.coords, loc, section, "components", i) for i, v in enumerate(comps))
        out[name] = VectorFieldSpec(parsed, name)
    return out


def _parse_axis(doc: Mapping, loc: _Locator) -> AxisMetric | None:
    sec = doc.get("axis")
    if sec is None:
        return None
    if not isinstance(sec, dict):
        raise _fail("[axis] must be a table")
    var = sec.get("variable", "u")
    if not isinstance(var, str) or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", var):
        raise _fail("axis.variable must be a name", loc.key("axis", "variable"))
    if "components" not in sec:
        raise _fail("[axis] is missing 'components'")
    comps = _parse_matrix(sec["components"], [var], loc, "axis")
    interval = _interval(sec.get("interval", [0.0, 2.0]), "axis.interval", loc.key("axis", "interval"))
    transverse = sec.get("transverse", ())
    try:
        return AxisMetric(var, comps, interval, tuple(transverse))
    except ValueError as err:
        raise _fail(f"axis: {err}", loc.key("axis", "components")) from None


def _parse_run(doc: Mapping, loc: _Locator) -> RunDefaults:
    sec = doc.get("run", {})
    if not isinstance(sec, dict):
        raise _fail("[run] must be a table")
    unknown = set(sec) - _RUN_KEYS
    if unknown:
        raise _fail(f"unknown keys in [run]: {sorted(unknown)}", loc.key("run", sorted(unknown)[0]))
    run = RunDefaults()

    def number(key, kind=float):
        v = sec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not isinstance(v, int)):
            raise _fail(f"run.{key} must be {'an integer' if kind is int else 'a number'}", loc.key("run", key))
        return kind(v)

    if "grid" in sec:
        if not isinstance(sec["grid"], str):
            raise _fail("run.grid must be a string 'a:b:h'", loc.key("run", "grid"))
        try:
            Grid.parse(sec["grid"])
        except ValueError as err:
            raise _fail(f"run.grid: {err}", loc.key("run", "grid")) from None
        run.grid = sec["grid"]
    if "samples" in sec:
        run.samples = number("samples", int)
    if "seed" in sec:
        run.seed = number("seed", int)
    if "threshold" in sec:
        run.threshold = number("threshold")
    if "lambda" in sec:
        run.lam = number("lambda")
    if "thresholds" in sec:
        th = sec["thresholds"]
        if not isinstance(th, dict):
            raise _fail("run.thresholds must be a table", loc.key("run", "thresholds"))
        run.thresholds = {k: float(v) for k, v in th.items()}
    if "eps" in sec:
        eps = sec["eps"]
        if not isinstance(eps, list) or not eps or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
            raise _fail("run.eps must be a list of positive numbers", loc.key("run", "eps"))
        run.eps = [float(e) for e in eps]
    if "at" in sec:
        at = sec["at"]
        if not isinstance(at, dict):
            raise _fail("run.at must be an inline table {name = value}", loc.key("run", "at"))
        run.at = {k: float(v) for k, v in at.items()}
    if "mode" in sec:
        if sec["mode"] not in ("exact", "fd"):
            raise _fail("run.mode must be 'exact' or 'fd'", loc.key("run", "mode"))
        run.mode = sec["mode"]
    if "field" in sec:
        run.field = str(sec["field"])
    return run


def parse_spec(text: str, name: str = "spec") -> SpecFile:
    """Parse and validate spec-file text."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        msg = getattr(err, "msg", str(err))
        raise SpecFileError(f"invalid spec syntax: {msg}", getattr(err, "lineno", None), getattr(err, "colno", None)) from None
    loc = _Locator(text)
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        line = next((i + 1 for i, s in enumerate(loc.lines) if re.match(r"^\s*\[?\s*" + re.escape(key), s)), None)
        raise SpecFileError(f"unknown section or key {key!r}", line, 1 if line else None)
    try:
        metric, domain = _parse_metric(doc, loc, name)
        fields = _parse_fields(doc, metric, loc)
    except ValueError as err:
        if isinstance(err, SpecFileError):
            raise
        raise SpecFileError(str(err), *loc.key("metric", "components")) from None
    axis = _parse_axis(doc, loc)
    run = _parse_run(doc, loc)
    digest = "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()
    return SpecFile(metric.name, name, digest, metric, domain, fields, axis, run)


def catalog_names() -> list[str]:
    root = resources.files(CATALOG_PACKAGE)
    return sorted(p.name[: -len(SPEC_SUFFIX)] for p in root.iterdir() if p.name.endswith(SPEC_SUFFIX))


def catalog_text(name: str) -> str:
    stem = name[: -len(SPEC_SUFFIX)] if name.endswith(SPEC_SUFFIX) else name
    if stem not in catalog_names():
        raise SpecFileError(f"no bundled spec named {name!r}; available: {', '.join(catalog_names())}")
    return resources.files(CATALOG_PACKAGE).joinpath(stem + SPEC_SUFFIX).read_text(encoding="utf-8")


def load_catalog(name: str) -> SpecFile:
    return parse_spec(catalog_text(name), name if name.endswith(SPEC_SUFFIX) else name + SPEC_SUFFIX)


def load_spec(path: str | Path) -> SpecFile:
    """Load a spec file from disk, falling back to the bundled catalog when
    ``path`` does not exist but names a catalog entry."""
    p = Path(path)
    if not p.exists():
        stem = p.name[: -len(SPEC_SUFFIX)] if p.name.endswith(SPEC_SUFFIX) else p.name
        if p.parent == Path(".") and stem in catalog_names():
            return load_catalog(stem)
        raise SpecFileError(f"cannot read spec file {str(path)!r}: no such file")
    try:
        raw = p.read_bytes()
    except OSError as err:
        raise SpecFileError(f"cannot read spec file {str(path)!r}: {err.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as err:
        raise SpecFileError(f"spec file is not valid UTF-8 (byte {err.start})") from None
    return parse_spec(text, p.name)
