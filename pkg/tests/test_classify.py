from __future__ import annotations

import pytest

from geolab.errors import ChartShapeError
from geolab.penrose.brinkmann import AxisMetric, penrose_limit_rosen
from geolab.penrose.classify import (
    check_brinkmann_class,
    check_slice_curvature,
    permute_chart,
    slice_metric,
)
from geolab.specfile import load_catalog
from geolab.tensor import LORENTZIAN, metric_from_strings


def _brinkmann(H: str, transverse=("1", "0", "1")):
    a, b, c = transverse
    return metric_from_strings(
        ["v", "u", "x2", "x3"], [["0"], ["1", H], ["0", "0", a], ["0", "0", b, c]], LORENTZIAN
    )


def _rosen_nc(axis: AxisMetric):
    # (r, t, x…) → (t, r, x…) so the parallel null field ∂_t comes first
    rosen = penrose_limit_rosen(axis)
    return permute_chart(rosen, [1, 0] + list(range(2, rosen.n)))


ROSEN_EXP = _rosen_nc(AxisMetric.from_strings("u", [["exp(sqrt(2)*u)"], ["0", "exp(sqrt(2)*u)"]]))
ROSEN_BUMP = _rosen_nc(AxisMetric.from_strings("u", [["1 + u^2"], ["0", "1"]]))


def test_catalog_waves():
    quad = check_brinkmann_class(load_catalog("brinkmann_quadratic").metric)
    assert quad.is_brinkmann and quad.is_pp_wave and quad.is_plane_wave
    cubic = check_brinkmann_class(load_catalog("brinkmann_cubic").metric)
    assert cubic.is_brinkmann and cubic.is_pp_wave and not cubic.is_plane_wave
    assert cubic.plane_residual > 1e-3


def test_u_dependent_quadratic_profile_is_a_plane_wave():
    c = check_brinkmann_class(_brinkmann("sin(u)*x2^2 + u*x2*x3 - x3^2"))
    assert c.is_plane_wave


def test_v_dependence_breaks_the_brinkmann_form():
    c = check_brinkmann_class(_brinkmann("v*x2^2"))
    assert not c.is_brinkmann and not c.is_pp_wave and not c.is_plane_wave
    assert c.x0_dependence > 1e-3


def test_curved_transverse_block_is_not_pp():
    m = metric_from_strings(
        ["v", "u", "x2", "x3"], [["0"], ["1", "x2^2"], ["0", "0", "1"], ["0", "0", "0", "exp(2*x2)"]], LORENTZIAN
    )
    c = check_brinkmann_class(m)
    assert c.is_brinkmann and not c.is_pp_wave


@pytest.mark.parametrize("metric", [ROSEN_EXP, ROSEN_BUMP], ids=["exp", "bump"])
def test_rosen_fixtures_are_plane_waves_with_flat_slices(metric):
    c = check_brinkmann_class(metric)
    assert c.is_plane_wave
    assert check_slice_curvature(metric, samples=8) <= 1e-8


def test_slice_curvature_equals_ambient_for_curved_slices():
    m = metric_from_strings(
        ["v", "u", "x2", "x3"],
        [["0"], ["1", "u*x2^2"], ["0", "0", "1"], ["0", "0", "0", "exp(2*x2)"]],
        LORENTZIAN,
    )
    assert check_slice_curvature(m, samples=8) <= 1e-8
    s = slice_metric(m, 0.1, 0.2)
    assert s.coords == ("x2", "x3") and s.signature == "riemannian"


def test_shape_is_required():
    with pytest.raises(ChartShapeError):
        check_brinkmann_class(load_catalog("desitter3").metric)


def test_permute_chart_round_trip():
    m = _brinkmann("x2*x3")
    back = permute_chart(permute_chart(m, [2, 0, 3, 1]), [1, 3, 0, 2])
    assert back == m
    with pytest.raises(ValueError):
        permute_chart(m, [0, 0, 1, 2])
