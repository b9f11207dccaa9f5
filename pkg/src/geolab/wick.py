"""Wick rotation along a unit closed vector field and its curvature identities.

Given a Riemannian metric g and a unit vector field T, the Lorentzian metric
is ``g_L = g − 2 T♭ ⊗ T♭`` (and conversely ``g = g_L + 2 T♭_L ⊗ T♭_L``).
For closed T, ``Rm_L = Rm + ∇T♭ ⧆ ∇T♭``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import ClosednessError, DegeneratePlaneError, SignatureError
from .sampling import parallel_map
from .tensor import (
    LORENTZIAN,
    RIEMANNIAN,
    CurvatureBundle,
    MetricSpec,
    check_signature,
    curvature_at,
    kulkarni_nomizu,
    max_abs,
    point_values,
    sectional_from_bundle,
)

TO_LORENTZIAN = "to_lorentzian"
TO_RIEMANNIAN = "to_riemannian"
DEFAULT_TOL = 1e-10
BOCHNER_STEP = 1e-4


@dataclass(frozen=True)
class VectorFieldSpec:
    """A contravariant vector field given by expression components."""

    components: tuple[ex.Expr, ...]
    name: str = "T"

    @classmethod
    def from_strings(cls, comps: Sequence[str], coords: Sequence[str], name: str = "T") -> "VectorFieldSpec":
        return cls(tuple(ex.parse(s, coords) if isinstance(s, str) else ex.num(s) for s in comps), name)

    def _compiled(self, coords: tuple[str, ...]):
        key = "_c:" + ",".join(coords)
        cached = self.__dict__.get(key)
        if cached is None:
            cached = ex.compile_exprs(self.components, coords)
            self.__dict__[key] = cached
        return cached

    def at(self, m: MetricSpec, p) -> np.ndarray:
        self._check(m)
        return np.array(self._compiled(m.coords)(*point_values(m, p)))

    def _check(self, m: MetricSpec) -> None:
        if len(self.components) != m.n:
            raise ValueError(f"vector field has {len(self.components)} components, metric has dimension {m.n}")


def flat(m: MetricSpec, T: VectorFieldSpec) -> tuple[ex.Expr, ...]:
    """T♭_i = g_ij T^j as expressions."""
    T._check(m)
    out = []
    for i in range(m.n):
        acc: ex.Expr = ex.num(0.0)
        for j in range(m.n):
            acc = ex.add(acc, ex.mul(m.components[i][j], T.components[j]))
        out.append(acc)
    return tuple(out)


class _FlatJet:
    """Compiled T♭ and its first derivatives for one (metric, field) pair."""

    def __init__(self, m: MetricSpec, T: VectorFieldSpec):
        self.m = m
        self.flat = flat(m, T)
        n = m.n
        exprs = list(self.flat)
        exprs += [ex.differentiate(self.flat[j], m.coords[a]) for a in range(n) for j in range(n)]
        self._fn = ex.compile_exprs(exprs, m.coords)

    def __call__(self, p) -> tuple[np.ndarray, np.ndarray]:
        n = self.m.n
        vals = np.array(self._fn(*point_values(self.m, p)))
        # d[a, j] = ∂_a T♭_j
        return vals[:n], vals[n:].reshape(n, n)


@dataclass
class UnitClosedReport:
    unit_residual: float
    closed_residual: float
    samples: int
    worst_unit_point: list[float] = field(default_factory=list)
    worst_closed_point: list[float] = field(default_factory=list)

    def passed(self, tol: float = DEFAULT_TOL) -> bool:
        return self.unit_residual <= tol and self.closed_residual <= tol


def _norm_sign(m: MetricSpec) -> float:
    return 1.0 if m.signature == RIEMANNIAN else -1.0


def check_unit_closed(m: MetricSpec, T: VectorFieldSpec, points: Sequence) -> UnitClosedReport:
    """max over points of |g(T,T) ∓ 1| and max_{i<j} |∂_i T♭_j − ∂_j T♭_i|."""
    jet = _FlatJet(m, T)
    sign = _norm_sign(m)
    unit = closed = 0.0
    wu: list[float] = []
    wc: list[float] = []
    for p in points:
        tv = T.at(m, p)
        tf, d = jet(p)
        u = abs(float(tv @ tf) - sign)
        c = max_abs(d - d.T)
        vals = list(point_values(m, p))
        if u >= unit:
            unit, wu = u, vals
        if c >= closed:
            closed, wc = c, vals
    return UnitClosedReport(unit, closed, len(points), wu, wc)


def wick_rotate(
    m: MetricSpec,
    T: VectorFieldSpec,
    direction: str,
    points: Sequence | None = None,
    tol: float = 1e-8,
) -> MetricSpec:
    """``g − 2T♭⊗T♭`` (to_lorentzian) or ``g_L + 2T♭⊗T♭`` (to_riemannian).

    When ``points`` are given, unitness of T is required there and the
    signature of the result is verified.
    """
    if direction == TO_LORENTZIAN:
        if m.signature != RIEMANNIAN:
            raise SignatureError("to_lorentzian needs a riemannian metric")
        coef, target = -2.0, LORENTZIAN
    elif direction == TO_RIEMANNIAN:
        if m.signature != LORENTZIAN:
            raise SignatureError("to_riemannian needs a lorentzian metric")
        coef, target = 2.0, RIEMANNIAN
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if points:
        rep = check_unit_closed(m, T, points)
        if rep.unit_residual > tol:
            raise ValueError(f"vector field is not unit length (residual {rep.unit_residual:.3e})")
    tf = flat(m, T)
    n = m.n
    c = ex.num(coef)
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1):
            rows[i][j] = rows[j][i] = ex.add(m.components[i][j], ex.mul(c, ex.mul(tf[i], tf[j])))
    out = MetricSpec(m.coords, tuple(map(tuple, rows)), target, m.name)
    for p in points or ():
        check_signature(out.matrix(p), target)
    return out


# ---------------------------------------------------------------------------
# Shape operator.


@dataclass
class ShapeData:
    point: tuple[float, ...]
    hess: np.ndarray
    eigs: np.ndarray
    eigvecs: np.ndarray
    divergence: float
    T: np.ndarray
    T_flat: np.ndarray
    asymmetry: float
    bundle: CurvatureBundle = field(repr=False)

    @property
    def multiplicities(self) -> list[int]:
        """Sizes of clusters of equal eigenvalues (to 1e-8)."""
        out: list[int] = []
        prev = None
        for lam in np.sort(self.eigs):
            if prev is not None and abs(lam - prev) <= 1e-8 * max(1.0, abs(lam)):
                out[-1] += 1
            else:
                out.append(1)
            prev = lam
        return out


def orthonormal_complement(g: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Columns form a g-orthonormal basis of T^⊥ (T non-null).

    Gram–Schmidt seeded from coordinate vectors, skipping the one with the
    largest |<∂_i, T>|.
    """
    n = len(T)
    tt = T @ g @ T
    inner = np.abs(g @ T)
    skip = int(np.argmax(inner))
    basis: list[np.ndarray] = []
    for i in range(n):
        if i == skip:
            continue
        v = np.zeros(n)
        v[i] = 1.0
        v = v - (T @ g @ v) / tt * T
        for b in basis:
            v = v - (b @ g @ v) / (b @ g @ b) * b
        norm2 = v @ g @ v
        if norm2 <= 0:
            raise DegeneratePlaneError("complement of T is not spacelike")
        basis.append(v / np.sqrt(norm2))
    return np.array(basis).T


def shape_data(m: MetricSpec, T: VectorFieldSpec, p, tol: float = 1e-8, jet: _FlatJet | None = None) -> ShapeData:
    """∇T♭, the eigenvalues of D = ∇T restricted to T^⊥ and div T at ``p``.

    ``hess[a, b] = (∇_a T♭)_b = ∂_a T♭_b − Γ^k_ab T♭_k``.  A hess asymmetry
    above ``tol`` (relative) means T is not closed and raises
    :class:`ClosednessError`.
    """
    jet = jet or _FlatJet(m, T)
    b = curvature_at(m, p, "ricci")
    tv = T.at(m, p)
    tf, d = jet(p)
    hess = d - np.einsum("kab,k->ab", b.gamma, tf)
    asym = max_abs(hess - hess.T)
    if asym > tol * max(1.0, max_abs(hess)):
        raise ClosednessError("covariant derivative of T-flat is not symmetric", asym)
    E = orthonormal_complement(b.g, tv)
    D = E.T @ (0.5 * (hess + hess.T)) @ E
    eigs, vecs = np.linalg.eigh(D)
    div = float(np.einsum("ab,ab->", b.g_inv, hess))
    return ShapeData(b.point, hess, eigs, E @ vecs, div, tv, tf, asym, b)


# ---------------------------------------------------------------------------
# Residual checks.


def _lorentzian_pair(m: MetricSpec, T: VectorFieldSpec) -> MetricSpec:
    return wick_rotate(m, T, TO_LORENTZIAN)


def closedT_residual(m: MetricSpec, T: VectorFieldSpec, points: Sequence) -> float:
    """max over points of |Rm_L − Rm − ∇T♭ ⧆ ∇T♭| (∇ of g)."""
    gl = _lorentzian_pair(m, T)
    jet = _FlatJet(m, T)

    def one(p):
        sd = shape_data(m, T, p, jet=jet)
        bl = curvature_at(gl, p, "ricci")
        return max_abs(bl.rm - sd.bundle.rm - kulkarni_nomizu(sd.hess, sd.hess))

    return max(parallel_map(one, points), default=0.0)


@dataclass
class Theorem3Residual:
    form_residual: float
    constant_curvature_residual: float


def theorem3_residual(m: MetricSpec, T: VectorFieldSpec, lam: float, points: Sequence) -> Theorem3Residual:
    """Residual of Rm = ½λ g⧆g − 2λ g⧆(T♭⊗T♭) − ∇T♭⧆∇T♭ and of
    Rm_L = ½λ g_L⧆g_L."""
    gl = _lorentzian_pair(m, T)
    jet = _FlatJet(m, T)

    def one(p):
        sd = shape_data(m, T, p, jet=jet)
        g = sd.bundle.g
        tt = np.outer(sd.T_flat, sd.T_flat)
        model = (
            0.5 * lam * kulkarni_nomizu(g, g)
            - 2.0 * lam * kulkarni_nomizu(g, tt)
            - kulkarni_nomizu(sd.hess, sd.hess)
        )
        bl = curvature_at(gl, p, "ricci")
        return max_abs(sd.bundle.rm - model), max_abs(bl.rm - 0.5 * lam * kulkarni_nomizu(bl.g, bl.g))

    res = parallel_map(one, points)
    return Theorem3Residual(max((r[0] for r in res), default=0.0), max((r[1] for r in res), default=0.0))


def _divergence(m: MetricSpec, T: VectorFieldSpec, jet: _FlatJet, values: np.ndarray) -> float:
    b = curvature_at(m, values, "ricci")
    tf, d = jet(values)
    hess = d - np.einsum("kab,k->ab", b.gamma, tf)
    return float(np.einsum("ab,ab->", b.g_inv, hess))


def bochner_terms(m: MetricSpec, T: VectorFieldSpec, p, step: float = BOCHNER_STEP, jet=None) -> dict[str, float]:
    """T(div T), Ric(T,T) and Σλ_i² at ``p``.

    T(div T) is the derivative of div along the line p + sT at s = 0
    (4th-order central difference with the given step).
    """
    jet = jet or _FlatJet(m, T)
    sd = shape_data(m, T, p, jet=jet)
    base = np.asarray(sd.point)
    f = [_divergence(m, T, jet, base + s * step * sd.T) for s in (-2, -1, 1, 2)]
    tdiv = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * step)
    ric_tt = float(sd.T @ sd.bundle.ric @ sd.T)
    return {
        "T_div": tdiv,
        "ric_TT": ric_tt,
        "sum_lambda_sq": float(np.sum(sd.eigs**2)),
        "sum_lambda": float(np.sum(sd.eigs)),
        "divergence": sd.divergence,
    }


def bochner_residual(m: MetricSpec, T: VectorFieldSpec, points: Sequence, step: float = BOCHNER_STEP) -> float:
    """max over points of |T(div T) + Ric(T,T) + Σλ_i²|."""
    jet = _FlatJet(m, T)

    def one(p):
        t = bochner_terms(m, T, p, step, jet)
        return abs(t["T_div"] + t["ric_TT"] + t["sum_lambda_sq"])

    return max(parallel_map(one, points), default=0.0)


def ricci_restriction_residual(m: MetricSpec, T: VectorFieldSpec, points: Sequence) -> float:
    """max |Ric(T,T) − Ric_L(T,T)|."""
    gl = _lorentzian_pair(m, T)
    worst = 0.0
    for p in points:
        tv = T.at(m, p)
        a = tv @ curvature_at(m, p, "ricci").ric @ tv
        b = tv @ curvature_at(gl, p, "ricci").ric @ tv
        worst = max(worst, abs(a - b))
    return worst


def schwarz_gap(m: MetricSpec, T: VectorFieldSpec, points: Sequence) -> float:
    """min over points of Σλ_i² − (Σλ_i)²/(n−1) (never negative in theory)."""
    jet = _FlatJet(m, T)
    out = np.inf
    for p in points:
        sd = shape_data(m, T, p, jet=jet)
        out = min(out, float(np.sum(sd.eigs**2) - np.sum(sd.eigs) ** 2 / (m.n - 1)))
    return float(out)


@dataclass
class SectionalReport:
    point: tuple[float, ...]
    eigs: list[float]
    multiplicities: list[int]
    k_T: list[float]
    k_pairs: dict[str, float]
    deviation_T: float
    deviation_pairs: float


def sectional_deviation_check(m: MetricSpec, T: VectorFieldSpec, lam: float, p) -> SectionalReport:
    """Sectional curvatures of planes (T, X_i) and (X_i, X_j) for the shape
    eigenbasis X_i, with deviations from −λ and λ − 2λ_iλ_j."""
    sd = shape_data(m, T, p)
    X = sd.eigvecs
    k = X.shape[1]
    kt = [sectional_from_bundle(sd.bundle, sd.T, X[:, i]) for i in range(k)]
    pairs = {}
    dev_p = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            K = sectional_from_bundle(sd.bundle, X[:, i], X[:, j])
            pairs[f"{i},{j}"] = K
            dev_p = max(dev_p, abs(K - (lam - 2 * sd.eigs[i] * sd.eigs[j])))
    dev_t = max((abs(K + lam) for K in kt), default=0.0)
    return SectionalReport(sd.point, sd.eigs.tolist(), sd.multiplicities, kt, pairs, dev_t, dev_p)


def riemannian_partner(m: MetricSpec, T: VectorFieldSpec, points: Sequence | None = None) -> MetricSpec:
    """The Riemannian member of a Wick pair (rotating a Lorentzian input)."""
    if m.signature == RIEMANNIAN:
        return m
    return wick_rotate(m, T, TO_RIEMANNIAN, points)
