"""Command-line entry point: ``geolab <command> <spec> [options]``.

Exit status: 0 on success, 2 when an obstruction verdict is OBSTRUCTED,
1 on any error (a JSON error object is written to stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import ChartShapeError, ClosednessError, GeolabError, SpecFileError
from .penrose.brinkmann import (
    OBSTRUCTED,
    AxisMetric,
    Grid,
    default_grid,
    obstruction_report,
    rosen_to_brinkmann,
    verify_brinkmann_isometry,
)
from .penrose.classify import check_brinkmann_class, check_slice_curvature
from .penrose.limit import hereditary_check, is_semigeodesic
from .report import VALUE, VERDICT, Check, Report, flag, reported, residual
from .sampling import DEFAULT_SAMPLES, DEFAULT_SEED, sample_box
from .specfile import SpecFile, load_spec
from .tensor import RIEMANNIAN, constant_curvature_residual, curvature_at, einstein_residual, max_abs
from .wick import (
    TO_LORENTZIAN,
    check_unit_closed,
    bochner_residual,
    closedT_residual,
    ricci_restriction_residual,
    riemannian_partner,
    schwarz_gap,
    sectional_deviation_check,
    theorem3_residual,
    wick_rotate,
)

COMMANDS = ("curvature", "penrose", "obstruct", "wick", "classify")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_OBSTRUCTED = 2

# Thresholds used for the pass/fail annotation of residual checks.
TOL_IDENTITY = 1e-9
TOL_SECOND_BIANCHI = 1e-8
TOL_HEREDITARY = 1e-8
TOL_ISOMETRY = 1e-6
TOL_WICK = 1e-8
TOL_BOCHNER = 1e-6
TOL_UNIT = 1e-10
MIN_ORDER = 0.9


class UsageError(GeolabError):
    kind = "usage_error"


# ---------------------------------------------------------------------------
# Argument handling.


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; 2 is reserved for
    OBSTRUCTED here, so usage errors become structured exit-1 errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(json.dumps({"error": UsageError.kind, "message": message}, sort_keys=True) + "\n")
        sys.exit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="geolab",
        description="Curvature, Penrose limits, Brinkmann obstructions and Wick-rotation checks for coordinate metrics.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("spec", help="path to a .spec file, or the name of a bundled example (e.g. desitter3)")
    p.add_argument("--at", help="evaluation point, e.g. 't=0.3,theta=pi/2,phi=0'")
    p.add_argument("--grid", help="axis grid a:b:h")
    p.add_argument("--eps", help="comma-separated epsilon values for the Penrose family")
    p.add_argument("--samples", type=int, help="number of seeded sample points")
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--field", help="vector field name from the spec")
    p.add_argument("--lambda", dest="lam", type=float, help="curvature constant")
    p.add_argument("--threshold", type=float, help="obstruction verdict threshold")
    p.add_argument("--mode", choices=("exact", "fd"), help="frame derivative mode")
    p.add_argument("--out", help="write the report to this path instead of stdout")
    p.add_argument("--format", choices=("json", "text"), default="json")
    return p


def parse_point(text: str, coords: Sequence[str]) -> dict[str, float]:
    """``"x=0,y=pi/4"`` -> {x: 0.0, y: 0.785…}; values are constant expressions."""
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"--at entries must look like name=value, got {part.strip()!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in coords:
            raise UsageError(f"--at names unknown coordinate {k!r}; chart is {list(coords)}")
        if k in out:
            raise UsageError(f"--at gives {k!r} twice")
        out[k] = ex.evaluate(ex.parse(v, []), {})
    missing = [c for c in coords if c not in out]
    if missing:
        raise UsageError(f"--at is missing coordinates {missing}")
    return out


def parse_eps(text: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--eps must be a comma-separated list of numbers, got {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise UsageError("--eps values must be positive")
    return vals


class Settings:
    """Effective parameters: command-line flags override [run] defaults."""

    def __init__(self, args: argparse.Namespace, spec: SpecFile):
        run = spec.run
        self.samples = args.samples if args.samples is not None else run.samples
        if self.samples is not None and self.samples < 1:
            raise UsageError("--samples must be positive")
        self.seed = args.seed if args.seed is not None else (run.seed if run.seed is not None else DEFAULT_SEED)
        self.lam = args.lam if args.lam is not None else run.lam
        self.lam_from_flag = args.lam is not None
        self.threshold = args.threshold if args.threshold is not None else run.threshold
        self.thresholds = dict(run.thresholds)
        self.mode = args.mode or run.mode or "exact"
        self.eps = parse_eps(args.eps) if args.eps else (run.eps or [1.0, 0.5, 0.25])
        self.grid_text = args.grid or run.grid
        self.field = args.field or run.field
        if args.at:
            self.at = parse_point(args.at, spec.metric.coords)
        elif run.at:
            self.at = {c: float(run.at[c]) for c in spec.metric.coords} if set(run.at) == set(spec.metric.coords) else None
            if self.at is None:
                raise SpecFileError("run.at must give every coordinate")
        else:
            self.at = None


# ---------------------------------------------------------------------------
# Commands.


def _require_semigeodesic(spec: SpecFile) -> None:
    m = spec.metric
    if m.signature != RIEMANNIAN or not is_semigeodesic(m):
        raise ChartShapeError(
            f"'{spec.name}' is not a riemannian metric in semigeodesic form dr^2 + g_ij dx^i dx^j"
        )


def _axis_for(spec: SpecFile) -> AxisMetric:
    if spec.axis is not None:
        return spec.axis
    _require_semigeodesic(spec)
    m = spec.metric
    interval = spec.domain.get(m.coords[0], (0.0, 2.0))
    return AxisMetric.from_semigeodesic(m, interval)


def _grid_for(axis: AxisMetric, s: Settings) -> Grid:
    return Grid.parse(s.grid_text) if s.grid_text else default_grid(axis)


def _witness(coords, values) -> dict:
    return {c: float(v) for c, v in zip(coords, values)}


def cmd_curvature(spec: SpecFile, s: Settings, rep: Report) -> None:
    m = spec.metric
    p = s.at or {c: 0.5 * (lo + hi) for c, (lo, hi) in spec.box().items()}
    rep.parameters["at"] = p
    b = curvature_at(m, p, "derivatives")
    rm = b.rm
    sym = max(
        max_abs(rm + rm.transpose(1, 0, 2, 3)),
        max_abs(rm + rm.transpose(0, 1, 3, 2)),
        max_abs(rm - rm.transpose(2, 3, 0, 1)),
    )
    bianchi1 = max_abs(rm + rm.transpose(0, 2, 3, 1) + rm.transpose(0, 3, 1, 2))
    c = b.cov_rm  # c[e, a, b, c, d] = ∇_e Rm_abcd
    bianchi2 = max_abs(c + c.transpose(1, 2, 0, 3, 4) + c.transpose(2, 0, 1, 3, 4))
    rep.add(reported("metric", b.g))
    rep.add(reported("christoffel", b.gamma, note="gamma[k, i, j] = Γ^k_ij"))
    rep.add(reported("riemann", rm, note="rm[a, b, c, d] = g(R(∂a, ∂b)∂c, ∂d)"))
    rep.add(reported("ricci", b.ric))
    rep.add(reported("scalar", b.scalar))
    if b.weyl is not None:
        rep.add(reported("weyl", b.weyl))
    rep.add(reported("max_abs_riemann", max_abs(rm)))
    rep.add(reported("max_abs_cov_riemann", max_abs(b.cov_rm)))
    rep.add(reported("max_abs_cov_ricci", max_abs(b.cov_ric)))
    rep.add(residual("riemann_symmetries", sym, TOL_IDENTITY))
    rep.add(residual("first_bianchi", bianchi1, TOL_IDENTITY))
    rep.add(residual("second_bianchi", bianchi2, TOL_SECOND_BIANCHI))
    if b.weyl is not None:
        rep.add(residual("weyl_trace", max_abs(np.einsum("ad,abcd->bc", b.g_inv, b.weyl)), TOL_IDENTITY))
    if s.lam is not None:
        rep.parameters["lambda"] = s.lam
        rep.add(residual("einstein_residual", einstein_residual(m, s.lam, p), TOL_IDENTITY))
        rep.add(residual("constant_curvature_residual", constant_curvature_residual(m, s.lam, p), TOL_IDENTITY))


def _frame_checks(rep: Report, frame, profile) -> None:
    rep.add(residual("frame_orthonormality", frame.orthonormality, None, note="max |C^T g C - I|"))
    rep.add(residual("frame_symmetry", frame.symmetry, None, note="max |S - S^T|, S = C^T g C'"))
    rep.add(residual("frame_rotation_orthogonality", frame.orthogonality, None))
    rep.add(residual("profile_asymmetry", profile.asymmetry, None))
    rep.add(reported("frame_reprojections", frame.reprojections))


def cmd_penrose(spec: SpecFile, s: Settings, rep: Report) -> None:
    _require_semigeodesic(spec)
    m = spec.metric
    samples = s.samples or 8
    rep.parameters.update(eps=s.eps, samples=samples, seed=s.seed, mode=s.mode, box=spec.box())
    if s.lam is not None:
        rep.parameters["lambda"] = s.lam
    h = hereditary_check(m, s.eps, samples, s.seed, spec.box(), s.lam)
    for rec in h.per_eps:
        tag = f"eps={rec.eps!r}"
        rep.add(residual(f"ricci_match[{tag}]", rec.ricci_match, TOL_HEREDITARY, note="Ric(h_eps) vs rescaled Ric(g)"))
        rep.add(residual(f"riemann_match[{tag}]", rec.riemann_match, TOL_HEREDITARY))
        rep.add(residual(f"weyl_match[{tag}]", rec.weyl_match, TOL_HEREDITARY))
        rep.add(residual(f"homothety[{tag}]", rec.homothety, TOL_HEREDITARY))
        rep.add(reported(f"deviation_from_limit[{tag}]", rec.deviation_from_limit))
    order = h.min_order
    rep.add(Check(
        "convergence_order", VALUE, value=order, threshold=MIN_ORDER, passed=bool(order >= MIN_ORDER),
        note="minimum empirical order of h_eps -> h_PW; passes when >= threshold",
    ))
    rep.add(reported("cov_riemann_limit", h.cov_rm_limit, note="max |nabla Rm| of h_PW at samples"))
    if h.einstein_lambda is not None:
        rep.add(reported("einstein_lambda", h.einstein_lambda))
        rep.add(residual("ricci_pw_vs_lambda_dr2", h.ric_pw_residual, TOL_HEREDITARY))
        rep.add(residual("scalar_pw", h.scalar_pw, TOL_HEREDITARY))

    axis = _axis_for(spec)
    grid = _grid_for(axis, s)
    rep.parameters["grid"] = str(grid)
    frame, profile = rosen_to_brinkmann(axis, grid, mode=s.mode)
    _frame_checks(rep, frame, profile)
    iso = verify_brinkmann_isometry(axis, frame, profile, samples=s.samples or 64, seed=s.seed)
    witness = {"r": iso.worst_point[0], "t": iso.worst_point[1], "x": iso.worst_point[2:]}
    rep.add(residual("brinkmann_isometry", iso.residual, TOL_ISOMETRY, witness=witness))


def cmd_obstruct(spec: SpecFile, s: Settings, rep: Report) -> int:
    axis = _axis_for(spec)
    grid = _grid_for(axis, s)
    threshold = s.threshold if s.threshold is not None else 1e-6
    rep.parameters.update(grid=str(grid), threshold=threshold, thresholds=s.thresholds, mode=s.mode)
    r = obstruction_report(axis, grid, threshold, s.thresholds, s.mode)
    for v in r.verdicts:
        d = v.as_dict()
        rep.add(Check(v.name, VERDICT, verdict=v.verdict, magnitude=v.magnitude, threshold=v.threshold, witness=d["witness"]))
    rep.add(reported("ric_uu_range", list(r.ric_uu_range)))
    _frame_checks(rep, r.frame, r.profile)
    iso = verify_brinkmann_isometry(axis, r.frame, r.profile, samples=s.samples or 64, seed=s.seed)
    rep.add(residual("brinkmann_isometry", iso.residual, TOL_ISOMETRY))
    if r.any_obstructed:
        rep.status = "obstructed"
        return EXIT_OBSTRUCTED
    return EXIT_OK


def _pick_field(spec: SpecFile, name: str | None):
    if name is None:
        if len(spec.fields) == 1:
            return next(iter(spec.fields.values()))
        if not spec.fields:
            raise UsageError("spec defines no vector fields; add a [fields.NAME] table")
        raise UsageError(f"spec defines several fields; choose one with --field ({', '.join(spec.fields)})")
    if name not in spec.fields:
        raise UsageError(f"no field named {name!r}; available: {', '.join(spec.fields) or 'none'}")
    return spec.fields[name]


def cmd_wick(spec: SpecFile, s: Settings, rep: Report) -> None:
    m = spec.metric
    T = _pick_field(spec, s.field)
    samples = s.samples or DEFAULT_SAMPLES
    rep.parameters.update(field=T.name, samples=samples, seed=s.seed, box=spec.box())
    pts = sample_box(spec.box(), m.coords, samples, s.seed)
    uc = check_unit_closed(m, T, pts)
    rep.add(residual("unit", uc.unit_residual, TOL_UNIT, witness=_witness(m.coords, uc.worst_unit_point)))
    rep.add(residual("closed", uc.closed_residual, TOL_UNIT, witness=_witness(m.coords, uc.worst_closed_point)))
    if uc.unit_residual > TOL_UNIT:
        raise ClosednessError("vector field is not unit on the sample box", uc.unit_residual)
    if uc.closed_residual > TOL_UNIT:
        raise ClosednessError("vector field is not closed on the sample box", uc.closed_residual)
    g = riemannian_partner(m, T, pts)
    rep.add(reported("input_signature", m.signature))
    if m.signature != RIEMANNIAN:
        back = wick_rotate(g, T, TO_LORENTZIAN, pts)
        inv = max(max_abs(back.matrix(p) - m.matrix(p)) for p in pts)
        rep.add(residual("wick_involution", inv, 1e-12))
    rep.add(residual("closedT", closedT_residual(g, T, pts), TOL_WICK))
    rep.add(residual("bochner", bochner_residual(g, T, pts), TOL_BOCHNER))
    rep.add(residual("ricci_restriction", ricci_restriction_residual(g, T, pts), TOL_WICK))
    rep.add(reported("schwarz_gap_min", schwarz_gap(g, T, pts), note="min of sum(l^2) - (sum l)^2/(n-1); never negative"))
    if s.lam is not None:
        rep.parameters["lambda"] = s.lam
        t3 = theorem3_residual(g, T, s.lam, pts)
        rep.add(residual("theorem3_form", t3.form_residual, TOL_WICK))
        rep.add(residual("theorem3_constant_curvature", t3.constant_curvature_residual, TOL_WICK))
        p = s.at or pts[0]
        rep.parameters["at"] = {c: float(v) for c, v in p.items()}
        sec = sectional_deviation_check(g, T, s.lam, p)
        rep.add(reported("shape_eigenvalues", sec.eigs))
        rep.add(reported("shape_multiplicities", sec.multiplicities))
        rep.add(residual("sectional_T_planes", sec.deviation_T, TOL_WICK, note="|K(T, X_i) + lambda|"))
        rep.add(residual("sectional_eigen_planes", sec.deviation_pairs, TOL_WICK, note="|K(X_i, X_j) - lambda + 2 l_i l_j|"))


def cmd_classify(spec: SpecFile, s: Settings, rep: Report) -> None:
    m = spec.metric
    samples = s.samples or 8
    rep.parameters.update(samples=samples, seed=s.seed, box=spec.box())
    c = check_brinkmann_class(m, samples, s.seed, spec.box())
    rep.add(flag("brinkmann", c.is_brinkmann))
    rep.add(flag("pp_wave", c.is_pp_wave))
    rep.add(flag("plane_wave", c.is_plane_wave))
    rep.add(reported("x0_dependence", c.x0_dependence))
    rep.add(reported("pp_residual", c.pp_residual))
    rep.add(reported("plane_residual", c.plane_residual))
    if c.is_pp_wave:
        rep.add(residual("slice_curvature", check_slice_curvature(m, samples, s.seed, spec.box()), TOL_WICK))


_DISPATCH = {
    "curvature": cmd_curvature,
    "penrose": cmd_penrose,
    "obstruct": cmd_obstruct,
    "wick": cmd_wick,
    "classify": cmd_classify,
}


def run(command: str, spec: SpecFile, args: argparse.Namespace) -> tuple[Report, int]:
    """Execute ``command`` on a loaded spec; returns the report and exit code."""
    if command not in _DISPATCH:
        raise UsageError(f"unknown command {command!r}")
    start = time.perf_counter()
    settings = Settings(args, spec)
    rep = Report(command, spec.name, spec.digest)
    code = _DISPATCH[command](spec, settings, rep) or EXIT_OK
    rep.wall_time_s = round(time.perf_counter() - start, 6)
    return rep, code


def _error_payload(err: BaseException) -> dict:
    if isinstance(err, GeolabError):
        return err.to_dict()
    if isinstance(err, (ValueError, ArithmeticError)):
        return {"error": "invalid_input", "message": str(err)}
    return {"error": "internal_error", "message": f"{type(err).__name__}: {err}"}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = load_spec(args.spec)
        rep, code = run(args.command, spec, args)
        text = rep.to_json() if args.format == "json" else rep.to_text()
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return code
    except Exception as err:  # every failure becomes a structured error
        sys.stderr.write(json.dumps(_error_payload(err), sort_keys=True) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
