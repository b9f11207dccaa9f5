from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from geolab.errors import DegeneratePlaneError, SignatureError, SingularMetricError
from geolab.sampling import sample_box
from geolab.tensor import (
    LORENTZIAN,
    conformal_scaling_check,
    constant_curvature_residual,
    curvature_at,
    einstein_residual,
    kulkarni_nomizu,
    max_abs,
    metric_from_strings,
    sectional_curvature,
)

SPHERE = metric_from_strings(["r", "theta"], [["1"], ["0", "sin(r)^2"]])
HYPERBOLIC = metric_from_strings(["r", "theta"], [["1"], ["0", "sinh(r)^2"]])
EXP3 = metric_from_strings(
    ["r", "x2", "x3"], [["1"], ["0", "exp(sqrt(2)*r)"], ["0", "0", "exp(sqrt(2)*r)"]]
)
DESITTER = metric_from_strings(
    ["t", "theta", "phi"],
    [["-1"], ["0", "cosh(t)^2"], ["0", "0", "cosh(t)^2*sin(theta)^2"]],
    LORENTZIAN,
)
GENERIC = metric_from_strings(
    ["r", "x", "y"], [["1 + x^2/4"], ["0.1*y", "exp(r)*(1+x^2)"], ["0", "x*y/3", "cosh(y)+r^2"]]
)


def _symmetry_defects(b):
    rm = b.rm
    return {
        "antisym_ab": max_abs(rm + rm.transpose(1, 0, 2, 3)),
        "antisym_cd": max_abs(rm + rm.transpose(0, 1, 3, 2)),
        "pair": max_abs(rm - rm.transpose(2, 3, 0, 1)),
        "bianchi1": max_abs(rm + np.einsum("adbc->abcd", rm) + np.einsum("acdb->abcd", rm)),
    }


def test_sphere_and_hyperbolic_values():
    b = curvature_at(SPHERE, [math.pi / 4, 0.0])
    assert b.rm[0, 1, 1, 0] == pytest.approx(0.5, abs=1e-14)
    assert b.scalar == pytest.approx(2.0, abs=1e-14)
    assert sectional_curvature(SPHERE, [0.7, 1.0], [1, 0], [0, 1]) == pytest.approx(1.0, abs=1e-13)
    assert sectional_curvature(HYPERBOLIC, [0.7, 1.0], [1, 2], [0, 1]) == pytest.approx(-1.0, abs=1e-13)


@pytest.mark.parametrize("metric, point", [(GENERIC, [0.3, 0.2, -0.4]), (EXP3, [0.1, 0.5, -0.2]), (DESITTER, [0.3, 1.1, 0.4])])
def test_engine_matches_finite_difference_oracle(metric, point):
    b = curvature_at(metric, point)
    assert max_abs(b.gamma - oracles.fd_christoffel(metric, point)) <= 1e-8
    assert max_abs(b.rm - oracles.fd_riemann(metric, point)) <= 1e-6


def test_einstein_example_has_lambda_minus_one():
    pts = sample_box({c: (-1.0, 1.0) for c in EXP3.coords}, EXP3.coords, 20, seed=3)
    assert max(einstein_residual(EXP3, -1.0, p) for p in pts) <= 1e-9
    assert einstein_residual(EXP3, -2.0, pts[0]) > 0.1


def test_de_sitter_has_constant_curvature_one():
    box = {"t": (-1.0, 1.0), "theta": (0.3, 2.8), "phi": (0.0, 6.0)}
    pts = sample_box(box, DESITTER.coords, 20, seed=0)
    assert max(constant_curvature_residual(DESITTER, 1.0, p) for p in pts) <= 1e-9
    assert constant_curvature_residual(DESITTER, 2.0, pts[0]) > 0.1


def test_brinkmann_christoffels_match_closed_form():
    # 2 dv du + H du² + dx2² + dx3²: Γ^v_uu = ½H_u, Γ^v_ui = ½H_i, Γ^i_uu = −½H_i
    m = metric_from_strings(
        ["v", "u", "x2", "x3"],
        [["0"], ["1", "x2^2 - x3^2 + u*x2*x3"], ["0", "0", "1"], ["0", "0", "0", "1"]],
        LORENTZIAN,
    )
    for p in sample_box({c: (-1.0, 1.0) for c in m.coords}, m.coords, 10, seed=1):
        u, x2, x3 = p["u"], p["x2"], p["x3"]
        Hu, H2, H3 = x2 * x3, 2 * x2 + u * x3, -2 * x3 + u * x2
        want = np.zeros((4, 4, 4))
        want[0, 1, 1] = 0.5 * Hu
        want[0, 1, 2] = want[0, 2, 1] = 0.5 * H2
        want[0, 1, 3] = want[0, 3, 1] = 0.5 * H3
        want[2, 1, 1] = -0.5 * H2
        want[3, 1, 1] = -0.5 * H3
        assert max_abs(curvature_at(m, p).gamma - want) <= 1e-12


@pytest.mark.parametrize("metric", [GENERIC, EXP3, DESITTER, SPHERE])
def test_algebraic_identities(metric):
    box = {c: (0.2, 0.9) for c in metric.coords}
    for p in sample_box(box, metric.coords, 10, seed=7):
        b = curvature_at(metric, p, "derivatives")
        assert max(_symmetry_defects(b).values()) <= 1e-9
        c = b.cov_rm
        assert max_abs(c + np.einsum("beacd->eabcd", c) + np.einsum("abecd->eabcd", c)) <= 1e-8
        if metric.n >= 3:
            assert max_abs(np.einsum("ad,abcd->bc", b.g_inv, b.weyl)) <= 1e-9
        else:
            assert b.weyl is None


def test_weyl_vanishes_in_dimension_three_and_for_conformally_flat():
    assert max_abs(curvature_at(GENERIC, [0.3, 0.2, -0.4]).weyl) <= 1e-12
    cf = metric_from_strings(
        ["a", "b", "c", "d"],
        [["exp(2*a)"], ["0", "exp(2*a)"], ["0", "0", "exp(2*a)"], ["0", "0", "0", "exp(2*a)"]],
    )
    assert max_abs(curvature_at(cf, [0.1, 0.2, 0.3, 0.4]).weyl) <= 1e-12
    s2s2 = metric_from_strings(
        ["a", "b", "c", "d"], [["1"], ["0", "sin(a)^2"], ["0", "0", "1"], ["0", "0", "0", "sin(c)^2"]]
    )
    assert max_abs(curvature_at(s2s2, [1.0, 0.2, 1.1, 0.4]).weyl) > 0.1


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.2, 1.2), st.floats(-1, 1))
def test_constant_rescaling_laws(c, r, x):
    res = conformal_scaling_check(GENERIC, c, [r, x, 0.3])
    assert res["ricci"] <= 1e-10
    assert res["riemann"] <= 1e-10 * c * c
    assert res["weyl"] <= 1e-10 * c * c


def test_kulkarni_nomizu_constant_curvature_and_dimension_two():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(4, 4))
    g = a @ a.T + 4 * np.eye(4)
    kn = kulkarni_nomizu(g, g)
    # ½ g⧆g has sectional curvature 1 on every plane
    v, w = rng.normal(size=4), rng.normal(size=4)
    K = np.einsum("abcd,a,b,c,d->", 0.5 * kn, v, w, w, v) / (v @ g @ v * (w @ g @ w) - (v @ g @ w) ** 2)
    assert K == pytest.approx(1.0, rel=1e-12)
    h = rng.normal(size=(4, 4))
    h = h + h.T
    assert max_abs(kulkarni_nomizu(g, h) - kulkarni_nomizu(h, g)) <= 1e-12
    # n = 2: every algebraic curvature tensor is a multiple of g⧆g, so h⧆h = det(h)/det(g)·g⧆g
    g2 = g[:2, :2]
    h2 = h[:2, :2]
    assert max_abs(kulkarni_nomizu(h2, h2) - np.linalg.det(h2) / np.linalg.det(g2) * kulkarni_nomizu(g2, g2)) <= 1e-10


def test_signature_and_singularity_errors():
    with pytest.raises(SignatureError):
        curvature_at(metric_from_strings(["x", "y"], [["1"], ["0", "1"]], LORENTZIAN), [0, 0])
    with pytest.raises(SignatureError):
        curvature_at(metric_from_strings(["x", "y"], [["-1"], ["0", "1"]]), [0, 0])
    with pytest.raises(SingularMetricError):
        curvature_at(metric_from_strings(["x", "y"], [["1"], ["0", "x"]]), [0.0, 0.0])


def test_degenerate_plane():
    with pytest.raises(DegeneratePlaneError):
        sectional_curvature(SPHERE, [1.0, 0.0], [1, 0], [2, 0])


@pytest.mark.parametrize(
    "coords, rows",
    [
        (["x"], [["1"]]),
        (["x", "x"], [["1"], ["0", "1"]]),
        (["x", "y"], [["1", "x"], ["y", "1"]]),
        (["x", "y"], [["1"], ["0", "z"]]),
    ],
)
def test_metric_validation(coords, rows):
    with pytest.raises(ValueError):
        metric_from_strings(coords, rows)


def test_point_must_match_chart():
    with pytest.raises(ValueError):
        curvature_at(SPHERE, {"r": 1.0})
    with pytest.raises(ValueError):
        curvature_at(SPHERE, [1.0, 2.0, 3.0])
