"""Time-symmetric embedding, null charts and the ε-scaled Penrose family."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import expr as ex
from ..errors import ChartShapeError, SignatureError
from ..sampling import sample_box
from ..tensor import (
    LORENTZIAN,
    RIEMANNIAN,
    MetricSpec,
    curvature_at,
    einstein_residual,
    max_abs,
)

SQRT2 = math.sqrt(2.0)
ZERO = ex.num(0.0)
ONE = ex.num(1.0)


def _fresh(name: str, taken: Sequence[str]) -> str:
    while name in taken:
        name += "_"
    return name


def build_time_symmetric_product(riem: MetricSpec, time_name: str = "t") -> MetricSpec:
    """The Lorentzian product −dt² + ḡ with ``t`` prepended to the chart."""
    if riem.signature != RIEMANNIAN:
        raise SignatureError("time-symmetric embedding needs a riemannian metric")
    t = _fresh(time_name, riem.coords)
    n = riem.n + 1
    rows = [[ZERO] * n for _ in range(n)]
    rows[0][0] = ex.num(-1.0)
    for i in range(riem.n):
        for j in range(riem.n):
            rows[i + 1][j + 1] = riem.components[i][j]
    return MetricSpec((t,) + riem.coords, tuple(map(tuple, rows)), LORENTZIAN, riem.name)


def is_semigeodesic(riem: MetricSpec) -> bool:
    """True when the first coordinate is a unit-speed geodesic parameter:
    g_00 ≡ 1 and g_0i ≡ 0 (checked on the expression trees)."""
    row = riem.components[0]
    return ex.is_const(row[0], 1.0) and all(ex.is_zero(e) for e in row[1:])


def _check_product_shape(prod: MetricSpec) -> None:
    if prod.signature != LORENTZIAN or prod.n < 3:
        raise ChartShapeError("expected a lorentzian product metric of dimension >= 3")
    c = prod.components
    t = prod.coords[0]
    if not ex.is_const(c[0][0], -1.0) or any(not ex.is_zero(e) for e in c[0][1:]):
        raise ChartShapeError("first coordinate is not a unit time factor (-dt^2 block)")
    if not ex.is_const(c[1][1], 1.0) or any(not ex.is_zero(e) for e in c[1][2:]):
        raise ChartShapeError("spatial part is not in semigeodesic form dr^2 + g_ij dx^i dx^j")
    for row in c:
        for e in row:
            if t in ex.free_vars(e):
                raise ChartShapeError("product metric components depend on time")


def to_null_chart(prod: MetricSpec, names: tuple[str, str] = ("x0", "x1")) -> MetricSpec:
    """Rewrite −dt² + dr² + g_ij(r, x) dx^i dx^j in x0 = (r+t)/√2, x1 = (r−t)/√2.

    The result is 2 dx0 dx1 + g_ij((x0+x1)/√2, x) dx^i dx^j.
    """
    _check_product_shape(prod)
    spatial = prod.coords[2:]
    x0 = _fresh(names[0], spatial)
    x1 = _fresh(names[1], spatial + (x0,))
    r = prod.coords[1]
    r_expr = ex.div(ex.add(ex.var(x0), ex.var(x1)), ex.call("sqrt", ex.num(2.0)))
    n = prod.n
    rows = [[ZERO] * n for _ in range(n)]
    rows[0][1] = rows[1][0] = ONE
    for i in range(2, n):
        for j in range(2, n):
            rows[i][j] = ex.substitute(prod.components[i][j], {r: r_expr})
    return MetricSpec((x0, x1) + spatial, tuple(map(tuple, rows)), LORENTZIAN, prod.name)


def null_to_product_point(values: Sequence[float]) -> np.ndarray:
    """(x0, x1, x...) -> (t, r, x...)."""
    v = np.asarray(values, dtype=float).copy()
    x0, x1 = v[0], v[1]
    v[0] = (x0 - x1) / SQRT2
    v[1] = (x0 + x1) / SQRT2
    return v


def null_chart_jacobian(n: int) -> np.ndarray:
    """∂(t, r, x...) / ∂(x0, x1, x...), a constant matrix."""
    J = np.eye(n)
    J[0, 0], J[0, 1] = 1 / SQRT2, -1 / SQRT2
    J[1, 0], J[1, 1] = 1 / SQRT2, 1 / SQRT2
    return J


def check_nc_shape(m: MetricSpec) -> None:
    """Require g_00 ≡ 0, g_01 ≡ 1 and g_0i ≡ 0 for i >= 2."""
    if m.signature != LORENTZIAN:
        raise ChartShapeError("null-coordinate form needs a lorentzian metric")
    row = m.components[0]
    if not (ex.is_zero(row[0]) and ex.is_const(row[1], 1.0) and all(ex.is_zero(e) for e in row[2:])):
        raise ChartShapeError("metric is not in null-coordinate form (g_00 = 0, g_01 = 1, g_0i = 0)")


def tilde_names(coords: Sequence[str]) -> tuple[str, ...]:
    names: list[str] = []
    for c in coords:
        names.append(_fresh(c + "_t", list(coords) + names))
    return tuple(names)


def scaling_weights(n: int, eps: float) -> np.ndarray:
    """J = (1, ε², ε, …, ε): dφ_ε⁻¹ maps ∂x̃_a to J_a ∂x_a."""
    J = np.full(n, eps, dtype=float)
    J[0], J[1] = 1.0, eps * eps
    return J


def tilde_to_null_point(values: Sequence[float], eps: float) -> np.ndarray:
    """φ_ε⁻¹: (x̃0, x̃1, x̃i) -> (x̃0, ε² x̃1, ε x̃i)."""
    v = np.asarray(values, dtype=float)
    return v * scaling_weights(len(v), eps)


def penrose_family(null_metric: MetricSpec, eps: float) -> MetricSpec:
    """The metric h_ε = g_ε / ε² in tilde coordinates.

    Components are (J_a J_b / ε²) g_ab evaluated at (x̃0, ε² x̃1, ε x̃2, …):
    row/column 1 picks up one factor ε per index, the transverse block is
    unchanged apart from the argument substitution.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    check_nc_shape(null_metric)
    n = null_metric.n
    new = tilde_names(null_metric.coords)
    J = scaling_weights(n, eps)
    subst = {
        c: ex.mul(ex.num(J[a]), ex.var(new[a])) for a, c in enumerate(null_metric.coords)
    }
    rows = [[ZERO] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            factor = J[a] * J[b] / (eps * eps)
            if a == 0 or b == 0:
                factor = 1.0 if {a, b} == {0, 1} else 0.0
            rows[a][b] = ex.mul(ex.num(factor), ex.substitute(null_metric.components[a][b], subst))
    return MetricSpec(new, tuple(map(tuple, rows)), LORENTZIAN, null_metric.name)


def plane_wave_limit(null_metric: MetricSpec) -> MetricSpec:
    """h_PW in tilde coordinates: 2 dx̃0 dx̃1 + g_ij(x̃0, 0, …, 0) dx̃^i dx̃^j."""
    check_nc_shape(null_metric)
    n = null_metric.n
    new = tilde_names(null_metric.coords)
    subst = {c: ZERO for c in null_metric.coords[1:]}
    subst[null_metric.coords[0]] = ex.var(new[0])
    rows = [[ZERO] * n for _ in range(n)]
    rows[0][1] = rows[1][0] = ONE
    for i in range(2, n):
        for j in range(2, n):
            rows[i][j] = ex.substitute(null_metric.components[i][j], subst)
    return MetricSpec(new, tuple(map(tuple, rows)), LORENTZIAN, null_metric.name)


def relabel_rosen(h_pw: MetricSpec, names: tuple[str, str] = ("r", "t")) -> MetricSpec:
    """Apply x̃0 = √2 r, x̃1 = t/√2 so that h_PW reads 2 dr dt + ḡ_ij(r) dx^i dx^j.

    Chart order stays (r, t, x…).
    """
    spatial = h_pw.coords[2:]
    r = _fresh(names[0], spatial)
    t = _fresh(names[1], spatial + (r,))
    subst = {
        h_pw.coords[0]: ex.mul(ex.call("sqrt", ex.num(2.0)), ex.var(r)),
        h_pw.coords[1]: ex.div(ex.var(t), ex.call("sqrt", ex.num(2.0))),
    }
    J = np.ones(h_pw.n)
    J[0], J[1] = SQRT2, 1 / SQRT2
    n = h_pw.n
    rows = [[ZERO] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            comp = ex.substitute(h_pw.components[a][b], subst)
            rows[a][b] = ex.mul(ex.num(J[a] * J[b]), comp) if not ex.is_zero(comp) else ZERO
    rows[0][1] = rows[1][0] = ONE
    return MetricSpec((r, t) + spatial, tuple(map(tuple, rows)), LORENTZIAN, h_pw.name)


# ---------------------------------------------------------------------------
# Hereditary checks.


@dataclass
class EpsilonRecord:
    eps: float
    ricci_match: float
    riemann_match: float
    weyl_match: float
    homothety: float
    deviation_from_limit: float
    cov_rm_max: float
    weyl_max: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class HereditaryReport:
    per_eps: list[EpsilonRecord]
    orders: list[float]
    einstein_lambda: float | None
    ric_pw_residual: float | None
    scalar_pw: float | None
    cov_rm_limit: float
    points: list[list[float]] = field(repr=False, default_factory=list)

    @property
    def min_order(self) -> float:
        return min(self.orders) if self.orders else float("nan")


def default_tilde_box(riem: MetricSpec, box: dict[str, tuple[float, float]] | None) -> list[tuple[float, float]]:
    """A sampling box for tilde points whose preimages stay inside ``box``.

    ``box`` is the riemannian metric's domain (r first); x̃0 ≈ √2 r so the
    r-range is scaled, x̃1 is kept small, transverse ranges are reused.
    """
    box = box or {}
    r_lo, r_hi = box.get(riem.coords[0], (-1.0, 1.0))
    width = r_hi - r_lo
    lo, hi = r_lo + 0.2 * width, r_hi - 0.2 * width
    out = [(SQRT2 * lo, SQRT2 * hi), (-0.1 * width, 0.1 * width)]
    for c in riem.coords[1:]:
        out.append(tuple(box.get(c, (-1.0, 1.0))))
    return out


def _sample_tilde(bounds, samples: int, seed: int) -> list[list[float]]:
    names = [f"c{i}" for i in range(len(bounds))]
    pts = sample_box(dict(zip(names, bounds)), names, samples, seed)
    return [[p[c] for c in names] for p in pts]


def detect_einstein(riem: MetricSpec, points, tol: float = 1e-8) -> float | None:
    """Return λ when Ric = λ g at every point (λ read off the first point)."""
    b = curvature_at(riem, points[0], "ricci")
    lam = float(np.trace(b.g_inv @ b.ric) / riem.n)
    for p in points:
        if einstein_residual(riem, lam, p) > tol * max(1.0, abs(lam)):
            return None
    return lam


def hereditary_check(
    riem: MetricSpec,
    eps_list: Sequence[float] = (1.0, 0.5, 0.25),
    samples: int = 8,
    seed: int = 0,
    box: dict[str, tuple[float, float]] | None = None,
    lam: float | None = None,
) -> HereditaryReport:
    """Compare h_ε with the rescaled curvature of g and with the limit h_PW.

    For each ε, at sampled tilde points x̃ with preimage x = φ_ε⁻¹(x̃):

    * Ric_{h_ε}(x̃) against J_a J_b Ric_g(x)         (Ric invariant under homothety)
    * Rm_{h_ε}(x̃) against ε⁻² J_a J_b J_c J_d Rm_g(x) (and Weyl likewise)
    * ε² h_ε(x̃) against the pullback J_a J_b g(x)
    * max |h_ε − h_PW| over components and points.

    When ``riem`` is Einstein (λ detected or given), Ric_PW = λ dr² is
    checked in the relabeled Rosen chart together with scalar(h_PW) = 0.
    """
    prod = build_time_symmetric_product(riem)
    null = to_null_chart(prod)
    h_pw = plane_wave_limit(null)
    bounds = default_tilde_box(riem, box)
    points = _sample_tilde(bounds, samples, seed)
    n = null.n

    riem_points = [null_to_product_point(tilde_to_null_point(p, 1.0))[1:] for p in points]
    if lam is None:
        lam = detect_einstein(riem, riem_points)

    records = []
    for eps in eps_list:
        h = penrose_family(null, eps)
        J = scaling_weights(n, eps)
        ric_d = rm_d = w_d = hom_d = dev = cov = wmax = 0.0
        for p in points:
            q = tilde_to_null_point(p, eps)
            bh = curvature_at(h, p, "derivatives")
            bg = curvature_at(null, q, "full")
            JJ = np.outer(J, J)
            J4 = np.einsum("a,b,c,d->abcd", J, J, J, J)
            ric_d = max(ric_d, max_abs(bh.ric - JJ * bg.ric))
            rm_d = max(rm_d, max_abs(bh.rm - J4 * bg.rm / eps**2))
            w_d = max(w_d, max_abs(bh.weyl - J4 * bg.weyl / eps**2))
            hom_d = max(hom_d, max_abs(JJ * bg.g - eps**2 * bh.g))
            dev = max(dev, max_abs(bh.g - h_pw.matrix(p)))
            cov = max(cov, max_abs(bh.cov_rm))
            wmax = max(wmax, max_abs(bh.weyl))
        records.append(EpsilonRecord(eps, ric_d, rm_d, w_d, hom_d, dev, cov, wmax))

    orders = []
    for a, b in zip(records, records[1:]):
        if a.deviation_from_limit > 0 and b.deviation_from_limit > 0 and a.eps != b.eps:
            orders.append(
                math.log(a.deviation_from_limit / b.deviation_from_limit) / math.log(a.eps / b.eps)
            )
        else:
            orders.append(float("inf"))

    cov_limit = max(max_abs(curvature_at(h_pw, p, "derivatives").cov_rm) for p in points)
    ric_res = scal = None
    if lam is not None:
        rosen = relabel_rosen(h_pw)
        dr2 = np.zeros((n, n))
        dr2[0, 0] = 1.0
        ric_res = 0.0
        scal = 0.0
        for p in points:
            rp = list(p)
            rp[0], rp[1] = p[0] / SQRT2, p[1] * SQRT2
            b = curvature_at(rosen, rp, "ricci")
            ric_res = max(ric_res, max_abs(b.ric - lam * dr2))
            scal = max(scal, abs(b.scalar))
    return HereditaryReport(records, orders, lam, ric_res, scal, cov_limit, points)
