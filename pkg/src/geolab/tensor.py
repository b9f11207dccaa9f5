"""Pointwise tensor calculus for coordinate metrics.

Conventions
-----------
* ``gamma[k, i, j]`` is the Christoffel symbol Γ^k_ij.
* ``rm[a, b, c, d] = Rm(∂a, ∂b, ∂c, ∂d) = g(R(∂a, ∂b)∂c, ∂d)`` with
  ``R(X, Y) = ∇X∇Y − ∇Y∇X − ∇[X,Y]``.  The unit sphere has
  ``Rm(X, Y, Y, X) = +1`` on orthonormal pairs.
* ``ric[b, c] = g^{ad} rm[a, b, c, d]``, ``scalar = g^{bc} ric[b, c]``.
* ``weyl = rm − P ⧆ g`` with the Schouten tensor
  ``P = (ric − scalar / (2(n−1)) g) / (n − 2)`` (n ≥ 3 only).
* ``cov_rm[a, b, c, d, e] = (∇_a Rm)_bcde``: the first index is the
  differentiation slot.  Likewise ``cov_ric[a, b, c] = (∇_a Ric)_bc``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import DegeneratePlaneError, SignatureError, SingularMetricError

__all__ = [
    "RIEMANNIAN",
    "LORENTZIAN",
    "MetricSpec",
    "CurvatureBundle",
    "metric_from_strings",
    "point_values",
    "check_signature",
    "curvature_from_jet",
    "curvature_at",
    "kulkarni_nomizu",
    "constant_curvature_residual",
    "einstein_residual",
    "sectional_curvature",
    "sectional_from_bundle",
    "conformal_scaling_check",
    "scale_metric",
    "max_abs",
]

RIEMANNIAN = "riemannian"
LORENTZIAN = "lorentzian"
SIGNATURES = (RIEMANNIAN, LORENTZIAN)
DEPTHS = ("ricci", "full", "derivatives")


def max_abs(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass(frozen=True)
class MetricSpec:
    """A metric given by expression components in a named chart.

    ``components`` is a full square matrix of expressions; construction
    checks that it is symmetric as a tree (``components[i][j] ==
    components[j][i]``).
    """

    coords: tuple[str, ...]
    components: tuple[tuple[ex.Expr, ...], ...]
    signature: str = RIEMANNIAN
    name: str = ""

    def __post_init__(self):
        n = len(self.coords)
        if not 2 <= n <= 8:
            raise ValueError(f"dimension must be between 2 and 8, got {n}")
        if len(set(self.coords)) != n:
            raise ValueError("coordinate names must be distinct")
        if self.signature not in SIGNATURES:
            raise ValueError(f"unknown signature tag {self.signature!r}")
        comps = tuple(tuple(row) for row in self.components)
        if len(comps) != n or any(len(row) != n for row in comps):
            raise ValueError(f"components must be a {n}x{n} matrix")
        for i in range(n):
            for j in range(i):
                if comps[i][j] != comps[j][i]:
                    raise ValueError(f"components are not symmetric at ({i}, {j})")
        allowed = set(self.coords)
        for row in comps:
            for e in row:
                extra = ex.free_vars(e) - allowed
                if extra:
                    raise ValueError(f"component uses undeclared coordinates {sorted(extra)}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "coords", tuple(self.coords))

    @property
    def n(self) -> int:
        return len(self.coords)

    def component(self, i: int, j: int) -> ex.Expr:
        return self.components[i][j]

    @classmethod
    def from_lower(cls, coords, lower, signature=RIEMANNIAN, name="") -> "MetricSpec":
        """Build from the lower triangle (row ``i`` has ``i + 1`` entries)."""
        n = len(coords)
        full = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1):
                full[i][j] = full[j][i] = lower[i][j]
        return cls(tuple(coords), tuple(tuple(r) for r in full), signature, name)

    # -- derivative jets ------------------------------------------------------

    @cached_property
    def _deriv_cache(self) -> dict:
        return {}

    def derivative(self, i: int, j: int, multi: Sequence[int]) -> ex.Expr:
        """∂_multi g_ij as an expression (cached; order of ``multi`` irrelevant)."""
        if i > j:
            i, j = j, i
        key = (i, j, tuple(sorted(multi)))
        cache = self._deriv_cache
        if key not in cache:
            if not key[2]:
                cache[key] = self.components[i][j]
            else:
                parent = self.derivative(i, j, key[2][:-1])
                cache[key] = ex.differentiate(parent, self.coords[key[2][-1]])
        return cache[key]

    def _compiled_order(self, order: int) -> ex.CompiledExprs:
        cache = self._deriv_cache
        key = ("compiled", order)
        if key not in cache:
            n = self.n
            multis = list(itertools.combinations_with_replacement(range(n), order))
            exprs = [
                self.derivative(i, j, m)
                for i in range(n)
                for j in range(i, n)
                for m in multis
            ]
            cache[key] = (ex.compile_exprs(exprs, self.coords), multis)
        return cache[key]

    def jet(self, p, order: int = 2) -> list[np.ndarray]:
        """Return ``[g, dg, d2g, ...]`` up to ``order`` at ``p``.

        ``dg[i, j, a] = ∂_a g_ij``, ``d2g[i, j, a, b] = ∂_a ∂_b g_ij`` and so on,
        fully symmetric in the derivative slots.
        """
        values = point_values(self, p)
        n = self.n
        out = []
        for k in range(order + 1):
            fn, multis = self._compiled_order(k)
            flat = fn(*values)
            arr = np.zeros((n, n) + (n,) * k)
            it = iter(flat)
            perms_cache = {m: set(itertools.permutations(m)) for m in multis}
            for i in range(n):
                for j in range(i, n):
                    for m in multis:
                        v = next(it)
                        for perm in perms_cache[m]:
                            arr[(i, j) + perm] = v
                            arr[(j, i) + perm] = v
            out.append(arr)
        return out

    def matrix(self, p) -> np.ndarray:
        return self.jet(p, 0)[0]


def metric_from_strings(
    coords: Sequence[str],
    rows: Sequence[Sequence[str]],
    signature: str = RIEMANNIAN,
    name: str = "",
) -> MetricSpec:
    """Parse a full or lower-triangular matrix of expression strings."""
    n = len(coords)
    parsed = [[ex.parse(s, coords) if isinstance(s, str) else ex.num(s) for s in row] for row in rows]
    if all(len(r) == i + 1 for i, r in enumerate(parsed)) and n > 1 and len(parsed[0]) == 1:
        return MetricSpec.from_lower(coords, parsed, signature, name)
    return MetricSpec(tuple(coords), tuple(tuple(r) for r in parsed), signature, name)


def point_values(m: MetricSpec, p) -> tuple[float, ...]:
    """Coordinate values of ``p`` in chart order.

    ``p`` is either a mapping with exactly the chart's coordinates or a
    sequence of length ``n``.
    """
    if isinstance(p, Mapping):
        keys = set(p)
        if keys != set(m.coords):
            missing = sorted(set(m.coords) - keys)
            extra = sorted(keys - set(m.coords))
            raise ValueError(f"point does not match chart: missing {missing}, extra {extra}")
        return tuple(float(p[c]) for c in m.coords)
    vals = tuple(float(x) for x in p)
    if len(vals) != m.n:
        raise ValueError(f"point has {len(vals)} values, chart has {m.n} coordinates")
    return vals


def check_signature(g: np.ndarray, signature: str) -> np.ndarray:
    """Verify invertibility and eigenvalue signs; return the inverse."""
    eig = np.linalg.eigvalsh(g)
    scale = max(1.0, float(np.max(np.abs(eig))))
    if np.min(np.abs(eig)) <= 1e-13 * scale:
        raise SingularMetricError(f"metric is singular (eigenvalues {eig.tolist()})")
    negatives = int(np.sum(eig < 0))
    expected = 0 if signature == RIEMANNIAN else 1
    if negatives != expected:
        raise SignatureError(
            f"expected {signature} signature but metric has {negatives} negative eigenvalue(s)"
        )
    return np.linalg.inv(g)


@dataclass
class CurvatureBundle:
    point: tuple[float, ...]
    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray
    rm: np.ndarray
    ric: np.ndarray
    scalar: float
    weyl: np.ndarray | None = None
    cov_rm: np.ndarray | None = None
    cov_ric: np.ndarray | None = None
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.g.shape[0]


def kulkarni_nomizu(P, Q) -> np.ndarray:
    """(P⧆Q)(v,w,x,y) = P(v,y)Q(w,x) + P(w,x)Q(v,y) − P(v,x)Q(w,y) − P(w,y)Q(v,x)."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.ndim != 2 or P.shape != Q.shape or P.shape[0] != P.shape[1]:
        raise ValueError(f"dimension mismatch: {P.shape} vs {Q.shape}")
    return (
        np.einsum("ad,bc->abcd", P, Q)
        + np.einsum("bc,ad->abcd", P, Q)
        - np.einsum("ac,bd->abcd", P, Q)
        - np.einsum("bd,ac->abcd", P, Q)
    )


def _christoffel(g_inv, dg):
    # first kind: G1[l, i, j] = ½(∂_i g_lj + ∂_j g_li − ∂_l g_ij)
    G1 = 0.5 * (np.einsum("lji->lij", dg) + dg - np.einsum("ijl->lij", dg))
    return G1, np.einsum("kl,lij->kij", g_inv, G1)


def curvature_from_jet(g, dg, d2g, d3g=None, depth: str = "full", point=()) -> CurvatureBundle:
    """Curvature data from the metric jet at one point.

    ``g_inv`` is taken as ``inv(g)`` without signature checks; use
    :func:`curvature_at` for validated evaluation.
    """
    if depth not in DEPTHS:
        raise ValueError(f"depth must be one of {DEPTHS}")
    n = g.shape[0]
    g_inv = np.linalg.inv(g)
    G1, gamma = _christoffel(g_inv, dg)

    dginv = -np.einsum("kp,pqa,qm->kma", g_inv, dg, g_inv)
    dG1 = 0.5 * (
        np.einsum("ljia->lija", d2g) + d2g - np.einsum("ijla->lija", d2g)
    )
    # dgamma[k, i, j, a] = ∂_a Γ^k_ij
    dgamma = np.einsum("kla,lij->kija", dginv, G1) + np.einsum("kl,lija->kija", g_inv, dG1)

    # R^e_{cab} stored as rup[e, c, a, b]
    rup = (
        np.einsum("ebca->ecab", dgamma)
        - np.einsum("eacb->ecab", dgamma)
        + np.einsum("eam,mbc->ecab", gamma, gamma)
        - np.einsum("ebm,mac->ecab", gamma, gamma)
    )
    rm = np.einsum("de,ecab->abcd", g, rup)
    ric = np.einsum("ad,abcd->bc", g_inv, rm)
    scalar = float(np.einsum("bc,bc->", g_inv, ric))
    bundle = CurvatureBundle(tuple(point), g, g_inv, gamma, rm, ric, scalar)
    if depth == "ricci":
        return bundle
    if n >= 3:
        schouten = (ric - scalar / (2.0 * (n - 1)) * g) / (n - 2)
        bundle.weyl = rm - kulkarni_nomizu(schouten, g)
    if depth == "full":
        return bundle
    if d3g is None:
        raise ValueError("depth='derivatives' needs third derivatives of the metric")

    d2ginv = -(
        np.einsum("kpb,pqa,qm->kmab", dginv, dg, g_inv)
        + np.einsum("kp,pqab,qm->kmab", g_inv, d2g, g_inv)
        + np.einsum("kp,pqa,qmb->kmab", g_inv, dg, dginv)
    )
    d2G1 = 0.5 * (
        np.einsum("ljiab->lijab", d3g) + d3g - np.einsum("ijlab->lijab", d3g)
    )
    d2gamma = (
        np.einsum("klab,lij->kijab", d2ginv, G1)
        + np.einsum("kla,lijb->kijab", dginv, dG1)
        + np.einsum("klb,lija->kijab", dginv, dG1)
        + np.einsum("kl,lijab->kijab", g_inv, d2G1)
    )
    # ∂_f R^e_{cab}
    drup = (
        np.einsum("ebcaf->ecabf", d2gamma)
        - np.einsum("eacbf->ecabf", d2gamma)
        + np.einsum("eamf,mbc->ecabf", dgamma, gamma)
        + np.einsum("eam,mbcf->ecabf", gamma, dgamma)
        - np.einsum("ebmf,mac->ecabf", dgamma, gamma)
        - np.einsum("ebm,macf->ecabf", gamma, dgamma)
    )
    drm = np.einsum("def,ecab->abcdf", dg, rup) + np.einsum("de,ecabf->abcdf", g, drup)
    # move the derivative slot to the front
    drm = np.moveaxis(drm, 4, 0)
    cov_rm = (
        drm
        - np.einsum("mfa,mbcd->fabcd", gamma, rm)
        - np.einsum("mfb,amcd->fabcd", gamma, rm)
        - np.einsum("mfc,abmd->fabcd", gamma, rm)
        - np.einsum("mfd,abcm->fabcd", gamma, rm)
    )
    dric = np.einsum("adf,abcd->fbc", dginv, rm) + np.einsum("ad,fabcd->fbc", g_inv, drm)
    cov_ric = (
        dric
        - np.einsum("mfb,mc->fbc", gamma, ric)
        - np.einsum("mfc,bm->fbc", gamma, ric)
    )
    bundle.cov_rm = cov_rm
    bundle.cov_ric = cov_ric
    return bundle


def curvature_at(m: MetricSpec, p, depth: str = "full") -> CurvatureBundle:
    """Evaluate the metric jet at ``p`` and compute curvature up to ``depth``.

    ``depth`` is ``"ricci"`` (Γ, Rm, Ric, scalar), ``"full"`` (adds Weyl) or
    ``"derivatives"`` (adds ∇Rm and ∇Ric; needs third derivatives).
    """
    if depth not in DEPTHS:
        raise ValueError(f"depth must be one of {DEPTHS}")
    order = 3 if depth == "derivatives" else 2
    values = point_values(m, p)
    jet = m.jet(values, order)
    check_signature(jet[0], m.signature)
    return curvature_from_jet(*jet, *([None] * (3 - order)), depth=depth, point=values)


def constant_curvature_residual(m: MetricSpec, lam: float, p) -> float:
    """max |Rm − ½λ g⧆g| at ``p``."""
    b = curvature_at(m, p, "ricci")
    return max_abs(b.rm - 0.5 * lam * kulkarni_nomizu(b.g, b.g))


def einstein_residual(m: MetricSpec, lam: float, p) -> float:
    """max |Ric − λ g| at ``p``."""
    b = curvature_at(m, p, "ricci")
    return max_abs(b.ric - lam * b.g)


def sectional_from_bundle(b: CurvatureBundle, v, w, tol: float = 1e-12) -> float:
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    gvv = v @ b.g @ v
    gww = w @ b.g @ w
    gvw = v @ b.g @ w
    denom = gvv * gww - gvw**2
    scale = max(1.0, abs(gvv * gww), gvw**2)
    if abs(denom) <= tol * scale:
        raise DegeneratePlaneError(
            f"degenerate plane: |v|²|w|² − <v,w>² = {denom:.3e} vanishes"
        )
    num = np.einsum("abcd,a,b,c,d->", b.rm, v, w, w, v)
    return float(num / denom)


def sectional_curvature(m: MetricSpec, p, v, w) -> float:
    """Rm(v, w, w, v) / (|v|²|w|² − <v, w>²)."""
    return sectional_from_bundle(curvature_at(m, p, "ricci"), v, w)


def scale_metric(m: MetricSpec, factor: float) -> MetricSpec:
    """The metric ``factor · m`` (a constant multiple)."""
    f = ex.num(factor)
    comps = tuple(tuple(ex.mul(f, e) for e in row) for row in m.components)
    return MetricSpec(m.coords, comps, m.signature, m.name)


def conformal_scaling_check(m: MetricSpec, c: float, p) -> dict[str, float]:
    """Residuals of the constant-rescaling laws for ``c² m`` versus ``m``.

    Ric is invariant, while Rm and W (all indices down) scale by c².
    """
    if not c > 0:
        raise ValueError("scale factor must be positive")
    base = curvature_at(m, p, "full")
    scaled = curvature_at(scale_metric(m, c * c), p, "full")
    out = {
        "ricci": max_abs(scaled.ric - base.ric),
        "riemann": max_abs(scaled.rm - c * c * base.rm),
    }
    if base.weyl is not None:
        out["weyl"] = max_abs(scaled.weyl - c * c * base.weyl)
    return out
