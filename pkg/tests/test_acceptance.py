"""Acceptance criteria, one test each.

Every test records a line ``[PASS] n. title: details`` (or ``[FAIL]``) and
then asserts.  The lines are printed in the pytest terminal summary (see
conftest.py) and when this file is run directly with ``python3``.
"""

from __future__ import annotations

import contextlib
import io
import json
import math
import sys

import numpy as np

from geolab import cli
from geolab import expr as ex
from geolab.penrose.brinkmann import AxisMetric, Grid, penrose_limit_rosen, rosen_to_brinkmann, verify_brinkmann_isometry
from geolab.penrose.classify import check_brinkmann_class, check_slice_curvature, permute_chart
from geolab.penrose.limit import hereditary_check
from geolab.sampling import sample_box
from geolab.specfile import catalog_names, load_catalog
from geolab.tensor import LORENTZIAN, constant_curvature_residual, curvature_at, einstein_residual, max_abs, metric_from_strings
from geolab.wick import bochner_residual, closedT_residual, riemannian_partner, theorem3_residual

RESULTS: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    RESULTS[number] = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
    print(RESULTS[number])
    return ok


def _wick_pair(name: str, samples: int = 32, seed: int = 0):
    spec = load_catalog(name)
    T = spec.fields["T"]
    pts = sample_box(spec.box(), spec.metric.coords, samples, seed)
    return spec.metric, riemannian_partner(spec.metric, T, pts), T, pts


def _run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main(argv)
    return code, out.getvalue()


AXES = {
    "flat": AxisMetric.from_strings("u", [["1"], ["0", "1"]]),
    "exp": AxisMetric.from_strings("u", [["exp(sqrt(2)*u)"], ["0", "exp(sqrt(2)*u)"]]),
    "bump": AxisMetric.from_strings("u", [["1 + u^2"], ["0", "1"]]),
}
ROTATING = AxisMetric.from_strings("u", [["cos(u)^2 + 2*sin(u)^2"], ["sin(u)*cos(u)", "sin(u)^2 + 2*cos(u)^2"]])


# ---------------------------------------------------------------------------


def test_1_einstein_example():
    m = load_catalog("exp_einstein3").metric
    pts = sample_box({c: (-1.0, 1.0) for c in m.coords}, m.coords, 20, seed=0)
    res = max(einstein_residual(m, -1.0, p) for p in pts)
    h = hereditary_check(m, (1.0, 0.5, 0.25), samples=8, seed=0, lam=-1.0)
    ok = res <= 1e-9 and h.ric_pw_residual <= 1e-8
    assert record(1, "Einstein example", ok, f"einstein residual {res:.2e} (<=1e-9), |Ric_PW + dr^2| {h.ric_pw_residual:.2e} (<=1e-8)")


def test_2_obstruction_verdicts():
    code, out = _run_cli(["obstruct", "exp_einstein3.spec"])
    c = {x["name"]: x for x in json.loads(out)["checks"]}
    rf, pr, ls = c["ricci_flat"], c["parallel_ricci"], c["locally_symmetric"]
    ok = (
        code == 2
        and rf["verdict"] == "OBSTRUCTED"
        and rf["magnitude"] > 1e-3
        and pr["verdict"] == "INCONCLUSIVE"
        and pr["magnitude"] <= 1e-8
        and ls["verdict"] == "INCONCLUSIVE"
        and ls["magnitude"] <= 1e-8
    )
    detail = (
        f"exit {code}; ricci_flat {rf['verdict']} |dH|={rf['magnitude']:.3g}; "
        f"parallel_ricci {pr['verdict']} {pr['magnitude']:.1e}; locally_symmetric {ls['verdict']} {ls['magnitude']:.1e}"
    )
    assert record(2, "Obstruction verdicts", ok, detail)


def test_3_rosen_brinkmann_isometry():
    parts, ok = [], True
    for name, axis in AXES.items():
        frame, prof = rosen_to_brinkmann(axis)
        r = verify_brinkmann_isometry(axis, frame, prof, samples=64, seed=0).residual
        ok &= r <= 1e-6
        part = f"{name} {r:.1e}"
        if max_abs(prof.A) > 0:
            mut = verify_brinkmann_isometry(axis, frame, prof.negated(), samples=64, seed=0).residual
            ok &= mut > 0.1
            part += f" (negated A {mut:.2g})"
        parts.append(part)
    assert record(3, "Rosen->Brinkmann isometry", ok, "; ".join(parts) + " [<=1e-6, mutation >0.1]")


def test_4_closed_field_identity():
    parts, ok = [], True
    for name in ("desitter3", "example2_3d", "flat3"):
        _, g, T, pts = _wick_pair(name)
        r = closedT_residual(g, T, pts)
        ok &= r <= 1e-8
        parts.append(f"{name} {r:.1e}")
    assert record(4, "Closed-field identity", ok, "; ".join(parts) + " [<=1e-8, 32 samples]")


def test_5_constant_curvature_form():
    gl, g, T, pts = _wick_pair("desitter3")
    good = theorem3_residual(g, T, 1.0, pts)
    bad = theorem3_residual(g, T, 2.0, pts)
    cc = max(constant_curvature_residual(gl, 1.0, p) for p in pts)
    ok = (
        good.form_residual <= 1e-8
        and good.constant_curvature_residual <= 1e-8
        and bad.form_residual > 0.1
        and bad.constant_curvature_residual > 0.1
        and cc <= 1e-9
    )
    detail = (
        f"lambda=1 ({good.form_residual:.1e}, {good.constant_curvature_residual:.1e}); "
        f"lambda=2 ({bad.form_residual:.2g}, {bad.constant_curvature_residual:.2g}); g_L constant curvature {cc:.1e}"
    )
    assert record(5, "Constant-curvature form", ok, detail)


def test_6_hereditary_laws():
    m = load_catalog("exp_einstein3").metric
    h = hereditary_check(m, (1.0, 0.5, 0.25), samples=8, seed=0)
    ric = max(r.ricci_match for r in h.per_eps)
    ok = ric <= 1e-8 and h.min_order >= 0.9
    orders = ", ".join(f"{o:.2f}" for o in h.orders)
    assert record(6, "Hereditary/conformal laws", ok, f"max |Ric_h - Ric_g| {ric:.1e} (<=1e-8); orders [{orders}] (>=0.9)")


def test_7_brinkmann_classification():
    quad = check_brinkmann_class(load_catalog("brinkmann_quadratic").metric)
    cubic = check_brinkmann_class(load_catalog("brinkmann_cubic").metric)

    chris = metric_from_strings(
        ["v", "u", "x2", "x3"], [["0"], ["1", "x2^2 - x3^2 + u*x2*x3"], ["0", "0", "1"], ["0", "0", "0", "1"]], LORENTZIAN
    )
    cdev = 0.0
    for p in sample_box({c: (-1.0, 1.0) for c in chris.coords}, chris.coords, 10, seed=1):
        u, x2, x3 = p["u"], p["x2"], p["x3"]
        Hu, H2, H3 = x2 * x3, 2 * x2 + u * x3, -2 * x3 + u * x2
        want = np.zeros((4, 4, 4))
        want[0, 1, 1] = 0.5 * Hu
        want[0, 1, 2] = want[0, 2, 1] = 0.5 * H2
        want[0, 1, 3] = want[0, 3, 1] = 0.5 * H3
        want[2, 1, 1] = -0.5 * H2
        want[3, 1, 1] = -0.5 * H3
        cdev = max(cdev, max_abs(curvature_at(chris, p).gamma - want))

    slices = []
    for name in ("exp", "bump"):
        rosen = penrose_limit_rosen(AXES[name])
        nc = permute_chart(rosen, [1, 0, 2, 3])
        slices.append(check_slice_curvature(nc, samples=8))
    ok = (
        quad.is_plane_wave
        and cubic.is_pp_wave
        and not cubic.is_plane_wave
        and cdev <= 1e-12
        and max(slices) <= 1e-8
    )
    detail = (
        f"quadratic plane={quad.is_plane_wave}; cubic pp={cubic.is_pp_wave} plane={cubic.is_plane_wave}; "
        f"Christoffel dev {cdev:.1e} (<=1e-12); slice residuals {slices[0]:.1e}, {slices[1]:.1e} (<=1e-8)"
    )
    assert record(7, "Brinkmann classification", ok, detail)


# -- criterion 8 pieces -------------------------------------------------------


def _catalog_identities():
    worst = {"sym+bianchi1": 0.0, "bianchi2": 0.0, "weyl_trace": 0.0}
    for name in catalog_names():
        spec = load_catalog(name)
        m = spec.metric
        for p in sample_box(spec.box(), m.coords, 20, seed=0):
            b = curvature_at(m, p, "derivatives")
            rm = b.rm
            sym = max(
                max_abs(rm + rm.transpose(1, 0, 2, 3)),
                max_abs(rm + rm.transpose(0, 1, 3, 2)),
                max_abs(rm - rm.transpose(2, 3, 0, 1)),
                max_abs(rm + np.einsum("adbc->abcd", rm) + np.einsum("acdb->abcd", rm)),
            )
            c = b.cov_rm
            b2 = max_abs(c + np.einsum("beacd->eabcd", c) + np.einsum("abecd->eabcd", c))
            worst["sym+bianchi1"] = max(worst["sym+bianchi1"], sym)
            worst["bianchi2"] = max(worst["bianchi2"], b2)
            if b.weyl is not None:
                worst["weyl_trace"] = max(worst["weyl_trace"], max_abs(np.einsum("ad,abcd->bc", b.g_inv, b.weyl)))
    return worst


def _random_expr(rng, depth: int) -> ex.Expr:
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return ex.var(["x", "y"][rng.integers(2)])
        return ex.num(float(rng.choice([0.5, 1.0, 2.0, 3.0, 1.5, 0.25])))
    a = _random_expr(rng, depth - 1)
    b = _random_expr(rng, depth - 1)
    k = rng.integers(11)
    if k == 0:
        return ex.add(a, b)
    if k == 1:
        return ex.sub(a, b)
    if k == 2:
        return ex.mul(a, b)
    if k == 3:
        return ex.neg(a)
    if k == 4:
        return ex.div(a, ex.add(ex.num(2.0), ex.call("sin", b)))
    if k == 5:
        return ex.call(["sin", "cos", "tanh"][rng.integers(3)], a)
    if k == 6:
        return ex.call("exp", ex.call("sin", a))
    if k == 7:
        return ex.call("ln", ex.add(ex.num(1.0), ex.mul(a, a)))
    if k == 8:
        return ex.call("sqrt", ex.add(ex.num(1.0), ex.mul(a, a)))
    if k == 9:
        return ex.power(a, ex.num(float(rng.choice([2.0, 3.0]))))
    return ex.power(ex.add(ex.num(1.5), ex.call("sin", a)), ex.call("cos", b))


def _expr_fd_suite(cases: int = 1000) -> tuple[int, float]:
    rng = np.random.default_rng(2024)
    worst, bad = 0.0, 0
    h = 1e-4
    for _ in range(cases):
        e = _random_expr(rng, 6)
        name = ["x", "y"][rng.integers(2)]
        p = {"x": float(rng.uniform(-1, 1)), "y": float(rng.uniform(-1, 1))}
        exact = ex.evaluate(ex.differentiate(e, name), p)

        def f(s):
            q = dict(p)
            q[name] += s
            return ex.evaluate(e, q)

        approx = (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h)
        err = abs(exact - approx) / max(1.0, abs(exact))
        worst = max(worst, err)
        bad += err > 1e-6
    return bad, worst


def _refinement_orders() -> dict[str, float]:
    out = {}
    for label, axis, mode in (("exact/rotating", ROTATING, "exact"), ("fd/exp", AXES["exp"], "fd")):
        _, ref = rosen_to_brinkmann(axis, Grid(0.0, 2.0, 0.0125), tol_frame=1e-4, mode=mode)
        errs = []
        for step in (0.2, 0.1, 0.05):
            _, prof = rosen_to_brinkmann(axis, Grid(0.0, 2.0, step), tol_frame=1e-4, mode=mode)
            errs.append(max_abs(prof.A - ref.A[:: int(round(step / 0.0125))]))
        out[label] = min(math.log2(a / b) for a, b in zip(errs, errs[1:]))
    return out


def _determinism() -> bool:
    def strip(text):
        return "\n".join(line for line in text.splitlines() if '"wall_time_s"' not in line)

    same = True
    for argv in (["obstruct", "exp_einstein3"], ["wick", "desitter3", "--lambda", "1"], ["classify", "brinkmann_cubic"]):
        a = _run_cli(argv)[1]
        b = _run_cli(argv)[1]
        same &= bool(a) and strip(a) == strip(b)
    return same


def test_8_property_suites():
    ident = _catalog_identities()
    boch = {name: bochner_residual(*_wick_pair(name)[1:]) for name in ("desitter3", "example2_3d")}
    bad, worst = _expr_fd_suite()
    orders = _refinement_orders()
    det = _determinism()
    ok = (
        ident["sym+bianchi1"] <= 1e-9
        and ident["bianchi2"] <= 1e-8
        and ident["weyl_trace"] <= 1e-9
        and max(boch.values()) <= 1e-6
        and bad == 0
        and min(orders.values()) >= 3.5
        and det
    )
    detail = (
        f"symmetries+Bianchi1 {ident['sym+bianchi1']:.1e}, Bianchi2 {ident['bianchi2']:.1e}, "
        f"Weyl trace {ident['weyl_trace']:.1e} on {len(catalog_names())} catalog metrics x 20 points; "
        f"Bochner {max(boch.values()):.1e}; expr FD 1000 cases, {bad} failures (worst {worst:.1e}); "
        f"frame order {', '.join(f'{k} {v:.2f}' for k, v in orders.items())}; byte-deterministic JSON {det}"
    )
    assert record(8, "Property suites", ok, detail)


if __name__ == "__main__":
    failed = 0
    for fn in (test_1_einstein_example, test_2_obstruction_verdicts, test_3_rosen_brinkmann_isometry,
               test_4_closed_field_identity, test_5_constant_curvature_form, test_6_hereditary_laws,
               test_7_brinkmann_classification, test_8_property_suites):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
