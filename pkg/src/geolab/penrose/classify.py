"""Brinkmann / pp-wave / plane-wave classification and the slice-curvature check.

Metrics are expected in null-coordinate shape with the candidate parallel
null field ∂_0 as the first coordinate (g_00 = 0, g_01 = 1, g_0i = 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .. import expr as ex
from ..sampling import sample_box
from ..tensor import RIEMANNIAN, MetricSpec, curvature_at, max_abs
from .limit import check_nc_shape

DEFAULT_TOL = 1e-9


@dataclass
class BrinkmannClass:
    is_brinkmann: bool
    is_pp_wave: bool
    is_plane_wave: bool
    x0_dependence: float
    pp_residual: float
    plane_residual: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def permute_chart(m: MetricSpec, order: Sequence[int]) -> MetricSpec:
    """Reorder coordinates: new coordinate ``k`` is old coordinate ``order[k]``."""
    order = list(order)
    if sorted(order) != list(range(m.n)):
        raise ValueError("order must be a permutation of the coordinate indices")
    coords = tuple(m.coords[i] for i in order)
    rows = tuple(tuple(m.components[i][j] for j in order) for i in order)
    return MetricSpec(coords, rows, m.signature, m.name)


def _default_box(m: MetricSpec, box):
    box = dict(box or {})
    return {c: tuple(box.get(c, (-1.0, 1.0))) for c in m.coords}


def check_brinkmann_class(
    m: MetricSpec,
    samples: int = 8,
    seed: int = 0,
    box: Mapping[str, tuple[float, float]] | None = None,
    tol: float = DEFAULT_TOL,
) -> BrinkmannClass:
    """Classify a null-coordinate metric.

    * Brinkmann: every ∂_{x0} g_ab simplifies to zero, or evaluates to zero
      at all samples.
    * pp-wave: Rm(X, Y, ·, ·) = 0 for X, Y in span{∂_0, ∂_2, …} = ∂_0^⊥.
    * plane wave: additionally (∇_X Rm) = 0 for X in ∂_0^⊥.
    """
    check_nc_shape(m)
    x0 = m.coords[0]
    pts = sample_box(_default_box(m, box), m.coords, samples, seed)
    dep_exprs = [ex.differentiate(m.components[a][b], x0) for a in range(m.n) for b in range(a, m.n)]
    nonzero = [e for e in dep_exprs if not ex.is_zero(e)]
    dep = 0.0
    if nonzero:
        fn = ex.compile_exprs(nonzero, m.coords)
        for p in pts:
            dep = max(dep, max(abs(v) for v in fn(*(p[c] for c in m.coords))))
    is_b = dep <= tol
    perp = [0] + list(range(2, m.n))
    pp_res = plane_res = 0.0
    for p in pts:
        b = curvature_at(m, p, "derivatives")
        scale = max(1.0, max_abs(b.rm))
        pp_res = max(pp_res, max_abs(b.rm[np.ix_(perp, perp)]) / scale)
        plane_res = max(plane_res, max_abs(b.cov_rm[perp]) / max(1.0, max_abs(b.cov_rm)))
    is_pp = is_b and pp_res <= tol
    is_plane = is_pp and plane_res <= tol
    return BrinkmannClass(is_b, is_pp, is_plane, dep, pp_res, plane_res)


def slice_metric(m: MetricSpec, b: float, c: float) -> MetricSpec:
    """Induced metric on Λ_{b,c} = {(b, c, x²,…)}."""
    subst = {m.coords[0]: ex.num(b), m.coords[1]: ex.num(c)}
    rows = tuple(
        tuple(ex.substitute(m.components[i][j], subst) for j in range(2, m.n)) for i in range(2, m.n)
    )
    return MetricSpec(m.coords[2:], rows, RIEMANNIAN, m.name + "_slice")


def check_slice_curvature(
    m: MetricSpec,
    samples: int = 8,
    seed: int = 0,
    box: Mapping[str, tuple[float, float]] | None = None,
) -> float:
    """max |Rm_slice − Rm_ambient| over transverse index tuples at samples."""
    check_nc_shape(m)
    pts = sample_box(_default_box(m, box), m.coords, samples, seed)
    worst = 0.0
    for p in pts:
        vals = [p[c] for c in m.coords]
        if m.n - 2 < 2:
            continue
        s = slice_metric(m, vals[0], vals[1])
        rs = curvature_at(s, vals[2:], "ricci").rm
        ra = curvature_at(m, vals, "ricci").rm[2:, 2:, 2:, 2:]
        worst = max(worst, max_abs(rs - ra))
    return worst
