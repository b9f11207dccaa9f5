"""Rosen plane waves, the Rosen→Brinkmann frame ODE and obstruction verdicts.

Internal conventions (checked by :func:`verify_brinkmann_isometry`):

* The Rosen wave is ``2 dr dt + ḡ_ij(r) dx̃^i dx̃^j`` on (r, t, x̃…).
* The Brinkmann chart is (v, u, x…) with ``2 du dv + H du² + Σ dx²`` and
  ``H = xᵀ A(u) x``.
* The map is ``u = r``, ``x̃ = C(u) x`` and ``v = t + ½ xᵀ S x`` with
  ``S = Cᵀ ḡ Ċ`` (symmetric by construction of C).
* ``A = −Ṗᵀ C`` with ``P = ḡ Ċ``; its derivative is ``dA = −(P̈ᵀ C + Ṗᵀ Ċ)``.

The frame is ``C = C₀ O`` where ``C₀ = L⁻ᵀ`` (``ḡ = L Lᵀ``) and
``Ȯ = W O``, ``W = ½(Mᵀ − M)``, ``M = C₀ᵀ ḡ Ċ₀``, integrated by classical
RK4 from ``O(u_min) = I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from .. import expr as ex
from ..errors import FrameError, GridError, SingularMetricError
from ..sampling import sample_rng
from ..tensor import LORENTZIAN, MetricSpec, curvature_from_jet, max_abs

DEFAULT_INTERVAL = (0.0, 2.0)
DEFAULT_STEP = 1e-3
DEFAULT_TOL_FRAME = 1e-8
DEFAULT_TOL_SYM = 1e-8
DEFAULT_THRESHOLD = 1e-6
REORTHO_EVERY = 100

OBSTRUCTED = "OBSTRUCTED"
INCONCLUSIVE = "INCONCLUSIVE"


# ---------------------------------------------------------------------------
# Axis data.


@dataclass(frozen=True)
class AxisMetric:
    """The transverse matrix ḡ_ij(r) of a Riemannian extension family."""

    variable: str
    gbar: tuple[tuple[ex.Expr, ...], ...]
    interval: tuple[float, float] = DEFAULT_INTERVAL
    transverse: tuple[str, ...] = ()

    def __post_init__(self):
        k = len(self.gbar)
        if k < 1 or any(len(row) != k for row in self.gbar):
            raise ValueError("axis matrix must be square")
        for i in range(k):
            for j in range(i):
                if self.gbar[i][j] != self.gbar[j][i]:
                    raise ValueError(f"axis matrix is not symmetric at ({i}, {j})")
        for row in self.gbar:
            for e in row:
                extra = ex.free_vars(e) - {self.variable}
                if extra:
                    raise ValueError(f"axis entries may only depend on {self.variable!r}, found {sorted(extra)}")
        if not self.transverse:
            object.__setattr__(self, "transverse", tuple(f"x{i + 2}" for i in range(k)))
        lo, hi = self.interval
        if not hi > lo:
            raise ValueError("axis interval must have positive length")

    @property
    def k(self) -> int:
        return len(self.gbar)

    @property
    def n(self) -> int:
        """Dimension of the Riemannian extensions (1 + transverse)."""
        return self.k + 1

    @classmethod
    def from_strings(cls, variable, rows, interval=DEFAULT_INTERVAL, transverse=()) -> "AxisMetric":
        parsed = [[ex.parse(s, [variable]) if isinstance(s, str) else ex.num(s) for s in row] for row in rows]
        k = len(parsed)
        if all(len(r) == i + 1 for i, r in enumerate(parsed)):
            full = [[None] * k for _ in range(k)]
            for i in range(k):
                for j in range(i + 1):
                    full[i][j] = full[j][i] = parsed[i][j]
            parsed = full
        return cls(variable, tuple(map(tuple, parsed)), tuple(map(float, interval)), tuple(transverse))

    @classmethod
    def from_semigeodesic(cls, riem: MetricSpec, interval=DEFAULT_INTERVAL) -> "AxisMetric":
        """ḡ_ij(r) = g_ij(r, 0, …, 0) for a metric dr² + g_ij(r, x) dx^i dx^j."""
        from .limit import is_semigeodesic

        if not is_semigeodesic(riem):
            raise ValueError("metric is not in semigeodesic form dr^2 + g_ij dx^i dx^j")
        r = riem.coords[0]
        subst = {c: ex.num(0.0) for c in riem.coords[1:]}
        rows = tuple(
            tuple(ex.substitute(riem.components[i][j], subst) for j in range(1, riem.n))
            for i in range(1, riem.n)
        )
        return cls(r, rows, tuple(map(float, interval)), riem.coords[1:])

    def _compiled(self, order: int):
        key = f"_c{order}"
        cached = self.__dict__.get(key)
        if cached is None:
            k = self.k
            exprs = []
            for i in range(k):
                for j in range(i, k):
                    e = self.gbar[i][j]
                    for _ in range(order):
                        e = ex.differentiate(e, self.variable)
                    exprs.append(e)
            cached = ex.compile_exprs(exprs, [self.variable])
            self.__dict__[key] = cached
        return cached

    def derivatives(self, u, order: int = 0) -> np.ndarray:
        """ḡ^{(order)} at each value of ``u``; shape (len(u), k, k)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        fn = self._compiled(order)
        k = self.k
        iu = np.triu_indices(k)
        out = np.empty((len(u), k, k))
        for idx, val in enumerate(u):
            vals = fn(float(val))
            m = np.empty((k, k))
            m[iu] = vals
            m.T[iu] = vals
            out[idx] = m
        return out

    def jet(self, u, order: int) -> list[np.ndarray]:
        return [self.derivatives(u, m) for m in range(order + 1)]


def penrose_limit_rosen(axis: AxisMetric, names: tuple[str, str] = ("r", "t"), check_points: int = 64) -> MetricSpec:
    """The Rosen plane wave 2 dr dt + ḡ_ij(r) dx^i dx^j on (r, t, x…).

    Positivity of ḡ is checked at ``check_points`` evenly spaced r values
    of the working interval.
    """
    lo, hi = axis.interval
    us = np.linspace(lo, hi, check_points)
    for u, g in zip(us, axis.derivatives(us, 0)):
        eig = np.linalg.eigvalsh(g)
        if eig[0] <= 0:
            raise SingularMetricError(f"axis matrix is not positive definite at r = {u:.6g}")
    r, t = names
    coords = (axis.variable, t) + axis.transverse
    if len(set(coords)) != len(coords):
        raise ValueError(f"coordinate names clash: {coords}")
    n = axis.k + 2
    zero, one = ex.num(0.0), ex.num(1.0)
    rows = [[zero] * n for _ in range(n)]
    rows[0][1] = rows[1][0] = one
    for i in range(axis.k):
        for j in range(axis.k):
            rows[i + 2][j + 2] = axis.gbar[i][j]
    return MetricSpec(coords, tuple(map(tuple, rows)), LORENTZIAN, "rosen")


# ---------------------------------------------------------------------------
# Grids.


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise GridError("grid step must be positive")
        if not self.stop > self.start:
            raise GridError("grid interval must have positive length")
        ratio = (self.stop - self.start) / self.step
        if abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio):
            raise GridError("grid step does not divide the interval")

    @property
    def size(self) -> int:
        return int(round((self.stop - self.start) / self.step)) + 1

    @property
    def nodes(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.size)

    def node_index(self, u: float, tol: float = 1e-9) -> int:
        pos = (u - self.start) / self.step
        i = int(round(pos))
        if not 0 <= i < self.size or abs(pos - i) > tol:
            raise GridError(f"u = {u!r} is not a grid node")
        return i

    @classmethod
    def parse(cls, text: str) -> "Grid":
        try:
            a, b, h = (float(s) for s in text.split(":"))
        except ValueError:
            raise GridError(f"grid must look like a:b:h, got {text!r}") from None
        return cls(a, b, h)

    def __str__(self) -> str:
        return f"{self.start!r}:{self.stop!r}:{self.step!r}"


def default_grid(axis: AxisMetric) -> Grid:
    lo, hi = axis.interval
    step = DEFAULT_STEP
    if abs((hi - lo) / step - round((hi - lo) / step)) > 1e-6:
        step = (hi - lo) / max(1, round((hi - lo) / step))
    return Grid(lo, hi, step)


# ---------------------------------------------------------------------------
# Batched small-matrix helpers.


def _T(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def _series_product(*factors: Sequence[np.ndarray], order: int) -> list[np.ndarray]:
    """Derivatives 0..order of a matrix product from the factors' derivatives."""
    result = list(factors[0][: order + 1])
    for f in factors[1:]:
        new = []
        for m in range(order + 1):
            acc = 0.0
            for j in range(m + 1):
                acc = acc + comb(m, j) * (result[j] @ f[m - j])
            new.append(acc)
        result = new
    return result


def _cholesky(g: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        for idx, m in enumerate(g):
            if np.linalg.eigvalsh(m)[0] <= 0:
                raise FrameError(
                    f"axis matrix not positive definite at u = {nodes[idx]:.6g}", idx
                ) from None
        raise FrameError("Cholesky factorisation failed") from None


def cholesky_frame_series(G: Sequence[np.ndarray], nodes: np.ndarray, order: int) -> list[np.ndarray]:
    """Derivatives 0..order of C₀ = L⁻ᵀ where ḡ = L Lᵀ (exact Taylor mode).

    ``G[m]`` is the batched m-th derivative of ḡ.  With ``L_m = L₀ Φ(L₀⁻¹ S_m L₀⁻ᵀ)``
    (Φ keeps the strict lower triangle and half the diagonal) and
    ``S_m = G_m − Σ_{0<j<m} C(m,j) L_j L_{m−j}ᵀ``; then B = L⁻¹ satisfies
    ``B_m = −L₀⁻¹ Σ_{j=1..m} C(m,j) L_j B_{m−j}`` and C₀^{(m)} = B_mᵀ.
    """
    L0 = _cholesky(G[0], nodes)
    k = L0.shape[-1]
    eye = np.broadcast_to(np.eye(k), L0.shape)
    L0inv = np.linalg.solve(L0, eye)
    Ls = [L0]
    lower = np.tril(np.ones((k, k)), -1) + 0.5 * np.eye(k)
    for m in range(1, order + 1):
        S = G[m].copy()
        for j in range(1, m):
            S = S - comb(m, j) * (Ls[j] @ _T(Ls[m - j]))
        X = L0inv @ S @ _T(L0inv)
        Ls.append(L0 @ (X * lower))
    Bs = [L0inv]
    for m in range(1, order + 1):
        acc = 0.0
        for j in range(1, m + 1):
            acc = acc + comb(m, j) * (Ls[j] @ Bs[m - j])
        Bs.append(-L0inv @ acc)
    return [_T(b) for b in Bs]


def _polar(O: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(O)
    return U @ Vt


def _rk4_orthogonal(W_nodes: np.ndarray, W_mid: np.ndarray, h: float, tol_frame: float) -> tuple[np.ndarray, int]:
    """Integrate Ȯ = W O from O = I; W at nodes and at midpoints.

    Returns (O per node, number of polar re-projections applied).
    """
    N, k, _ = W_nodes.shape
    O = np.empty((N, k, k))
    O[0] = np.eye(k)
    eye = np.eye(k)
    fixes = 0
    cur = eye
    for i in range(N - 1):
        Wa, Wm, Wb = W_nodes[i], W_mid[i], W_nodes[i + 1]
        k1 = Wa @ cur
        k2 = Wm @ (cur + 0.5 * h * k1)
        k3 = Wm @ (cur + 0.5 * h * k2)
        k4 = Wb @ (cur + h * k3)
        cur = cur + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (i + 1) % REORTHO_EVERY == 0 and max_abs(cur.T @ cur - eye) > tol_frame / 10:
            cur = _polar(cur)
            fixes += 1
        O[i + 1] = cur
    return O, fixes


def _central4(f: np.ndarray, h: float) -> np.ndarray:
    """4th-order central first derivative; drops two nodes at each end."""
    return (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)


def _d4_stencil(func, u: np.ndarray, delta: float) -> np.ndarray:
    return (func(u - 2 * delta) - 8 * func(u - delta) + 8 * func(u + delta) - func(u + 2 * delta)) / (12 * delta)


# ---------------------------------------------------------------------------
# Frame and profile.


@dataclass
class FrameSolution:
    grid: Grid
    C: np.ndarray
    dC: np.ndarray
    d2C: np.ndarray
    O: np.ndarray
    M: np.ndarray
    gbar: np.ndarray
    dgbar: np.ndarray
    orthonormality: float
    symmetry: float
    orthogonality: float
    reprojections: int = 0
    mode: str = "exact"

    @property
    def S(self) -> np.ndarray:
        """S = Cᵀ ḡ Ċ per node (symmetric)."""
        return _T(self.C) @ self.gbar @ self.dC

    @property
    def dS(self) -> np.ndarray:
        return (
            _T(self.dC) @ self.gbar @ self.dC
            + _T(self.C) @ self.dgbar @ self.dC
            + _T(self.C) @ self.gbar @ self.d2C
        )


@dataclass
class BrinkmannProfile:
    grid: Grid
    A: np.ndarray
    dA: np.ndarray
    asymmetry: float
    dA_asymmetry: float = 0.0

    @property
    def laplacian(self) -> np.ndarray:
        """ΔH = 2 tr A at each node."""
        return 2.0 * np.trace(self.A, axis1=1, axis2=2)

    @property
    def laplacian_u(self) -> np.ndarray:
        """∂_u ΔH = 2 tr dA."""
        return 2.0 * np.trace(self.dA, axis1=1, axis2=2)

    def negated(self) -> "BrinkmannProfile":
        return BrinkmannProfile(self.grid, -self.A, -self.dA, self.asymmetry, self.dA_asymmetry)


def _frame_invariants(C, dC, O, gbar, tol_frame, nodes, where=slice(None)):
    k = C.shape[-1]
    eye = np.eye(k)
    on = np.max(np.abs(_T(C) @ gbar @ C - eye), axis=(1, 2))
    S = _T(C) @ gbar @ dC
    sym = np.max(np.abs(S - _T(S)), axis=(1, 2))
    orth = np.max(np.abs(_T(O) @ O - eye), axis=(1, 2))
    for name, arr in (("C^T g C = I", on), ("C^T g C' symmetric", sym), ("O^T O = I", orth)):
        sub = arr[where]
        bad = np.nonzero(sub > tol_frame)[0]
        if len(bad):
            node = int(bad[0])
            raise FrameError(f"frame invariant '{name}' violated by {sub[node]:.3e}", node)
    return float(on[where].max()), float(sym[where].max()), float(orth[where].max())


def rosen_to_brinkmann(
    axis: AxisMetric,
    grid: Grid | None = None,
    tol_frame: float = DEFAULT_TOL_FRAME,
    tol_sym: float = DEFAULT_TOL_SYM,
    mode: str = "exact",
) -> tuple[FrameSolution, BrinkmannProfile]:
    """Solve for the Brinkmann frame C and the profile A on a uniform grid.

    ``mode="exact"`` propagates exact u-derivatives of ḡ through the Cholesky
    factor (Taylor arithmetic) and differentiates O through the ODE itself.
    ``mode="fd"`` takes Ċ₀ by 4th-order central differences with step h/5
    and Ṗ, P̈, C̈ by 4th-order central differences on the grid (four ghost
    nodes on each side, so ḡ must be defined slightly beyond the interval).
    """
    grid = grid or default_grid(axis)
    if mode == "exact":
        return _rosen_exact(axis, grid, tol_frame, tol_sym)
    if mode == "fd":
        return _rosen_fd(axis, grid, tol_frame, tol_sym)
    raise ValueError("mode must be 'exact' or 'fd'")


def _profile_from(P1, P2, C, dC, grid, tol_sym) -> BrinkmannProfile:
    A_raw = -_T(P1) @ C
    dA_raw = -(_T(P2) @ C + _T(P1) @ dC)
    asym = max_abs(A_raw - _T(A_raw))
    dasym = max_abs(dA_raw - _T(dA_raw))
    A = 0.5 * (A_raw + _T(A_raw))
    dA = 0.5 * (dA_raw + _T(dA_raw))
    return BrinkmannProfile(grid, A, dA, asym, dasym)


def _rosen_exact(axis, grid, tol_frame, tol_sym):
    h = grid.step
    fine = grid.start + 0.5 * h * np.arange(2 * grid.size - 1)
    G = axis.jet(fine, 3)
    C0 = cholesky_frame_series(G, fine, 3)
    # M = C₀ᵀ ḡ Ċ₀ and its first two derivatives
    C0T = [_T(c) for c in C0]
    dC0 = C0[1:]
    M = _series_product(C0T, G, dC0, order=2)
    W = [0.5 * (_T(m) - m) for m in M]
    W_nodes, W_mid = W[0][0::2], W[0][1::2]
    O, fixes = _rk4_orthogonal(W_nodes, W_mid, h, tol_frame)
    Wn = [w[0::2] for w in W]
    On = [O]
    for m in range(3):
        acc = 0.0
        for j in range(m + 1):
            acc = acc + comb(m, j) * (Wn[j] @ On[m - j])
        On.append(acc)
    C0n = [c[0::2] for c in C0]
    Gn = [g[0::2] for g in G]
    C = _series_product(C0n, On, order=3)
    dCs = C[1:]
    P = _series_product(Gn, dCs, order=2)
    on, sym, orth = _frame_invariants(C[0], C[1], O, Gn[0], tol_frame, grid.nodes)
    frame = FrameSolution(grid, C[0], C[1], C[2], O, M[0][0::2], Gn[0], Gn[1], on, sym, orth, fixes, "exact")
    profile = _profile_from(P[1], P[2], C[0], C[1], grid, tol_sym)
    return frame, profile


def _rosen_fd(axis, grid, tol_frame, tol_sym):
    h = grid.step
    pad = 4
    delta = h / 5.0
    half = grid.start + 0.5 * h * np.arange(-2 * pad, 2 * (grid.size + pad) - 1)

    def c0(u):
        L = _cholesky(axis.derivatives(u, 0), np.atleast_1d(u))
        k = L.shape[-1]
        return _T(np.linalg.solve(L, np.broadcast_to(np.eye(k), L.shape)))

    C0 = c0(half)
    dC0 = _d4_stencil(c0, half, delta)
    g_half = axis.derivatives(half, 0)
    M = _T(C0) @ g_half @ dC0
    W = 0.5 * (_T(M) - M)
    W_nodes, W_mid = W[0::2], W[1::2]
    # forward from grid.start, backward for the left ghosts
    O_fwd, fixes = _rk4_orthogonal(W_nodes[pad:], W_mid[pad:], h, tol_frame)
    O_bwd, fixes_b = _rk4_orthogonal(W_nodes[: pad + 1][::-1], W_mid[:pad][::-1], -h, tol_frame)
    O = np.concatenate([O_bwd[::-1][:-1], O_fwd])
    Wn = W_nodes
    C0n, dC0n = C0[0::2], dC0[0::2]
    C = C0n @ O
    dC = dC0n @ O + C0n @ (Wn @ O)
    g_ext = g_half[0::2]
    P = g_ext @ dC
    P1 = _central4(P, h)  # extended nodes 2 .. end-2
    P2 = _central4(P1, h)  # grid nodes
    d2C = _central4(dC, h)[2 : 2 + grid.size]
    inner = slice(pad, pad + grid.size)
    P1n = P1[2 : 2 + grid.size]
    Cn, dCn, On_ = C[inner], dC[inner], O[inner]
    on, sym, orth = _frame_invariants(Cn, dCn, On_, g_ext[inner], tol_frame, grid.nodes)
    dg_ext = axis.derivatives(grid.nodes, 1)
    frame = FrameSolution(grid, Cn, dCn, d2C, On_, M[0::2][inner], g_ext[inner], dg_ext, on, sym, orth, fixes + fixes_b, "fd")
    profile = _profile_from(P1n, P2, Cn, dCn, grid, tol_sym)
    return frame, profile


# ---------------------------------------------------------------------------
# Isometry oracle.


def _hermite(nodes_y, nodes_dy, grid: Grid, u: float) -> tuple[np.ndarray, np.ndarray]:
    """Cubic Hermite value and derivative at ``u``."""
    h = grid.step
    pos = (u - grid.start) / h
    i = min(max(int(math.floor(pos)), 0), grid.size - 2)
    s = pos - i
    y0, y1 = nodes_y[i], nodes_y[i + 1]
    m0, m1 = nodes_dy[i] * h, nodes_dy[i + 1] * h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    val = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
    d00 = 6 * s**2 - 6 * s
    d10 = 3 * s**2 - 4 * s + 1
    d01 = -6 * s**2 + 6 * s
    d11 = 3 * s**2 - 2 * s
    der = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h
    return val, der


@dataclass
class IsometryReport:
    residual: float
    samples: int
    seed: int
    worst_point: list[float] = field(default_factory=list)


def brinkmann_matrix(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Brinkmann metric matrix in (v, u, x…) with H = xᵀ A x."""
    k = len(x)
    G = np.zeros((k + 2, k + 2))
    G[0, 1] = G[1, 0] = 1.0
    G[1, 1] = x @ A @ x
    G[2:, 2:] = np.eye(k)
    return G


def verify_brinkmann_isometry(
    axis: AxisMetric,
    frame: FrameSolution,
    profile: BrinkmannProfile,
    samples: int = 64,
    seed: int = 0,
    points: Sequence[Sequence[float]] | None = None,
) -> IsometryReport:
    """Pull the Brinkmann metric back along the coordinate map and compare
    with the Rosen components.

    Rosen points are (r, t, x̃…); r is drawn uniformly from the grid
    interval, t and x̃ from [−1, 1].  C, S and A are cubic-Hermite
    interpolated from their node values and derivatives.
    """
    grid = frame.grid
    k = axis.k
    if points is None:
        pts = []
        for i in range(samples):
            rng = sample_rng(seed, i)
            r = rng.uniform(grid.start, grid.stop)
            rest = rng.uniform(-1.0, 1.0, size=k + 1)
            pts.append([r, *rest])
    else:
        pts = [list(map(float, p)) for p in points]
    S_nodes, dS_nodes = frame.S, frame.dS
    S_nodes = 0.5 * (S_nodes + _T(S_nodes))
    dS_nodes = 0.5 * (dS_nodes + _T(dS_nodes))
    worst, worst_pt = 0.0, []
    for p in pts:
        r, t, xt = p[0], p[1], np.asarray(p[2:])
        if not grid.start - 1e-12 <= r <= grid.stop + 1e-12:
            raise GridError(f"sample r = {r!r} lies outside the grid [{grid.start}, {grid.stop}]")
        C, dC = _hermite(frame.C, frame.dC, grid, r)
        S, dS = _hermite(S_nodes, dS_nodes, grid, r)
        A, _ = _hermite(profile.A, profile.dA, grid, r)
        B = np.linalg.inv(C)
        dB = -B @ dC @ B
        x = B @ xt
        J = np.zeros((k + 2, k + 2))
        # rows: (v, u, x), columns: (r, t, x̃)
        dx_dr = dB @ xt
        J[0, 0] = 0.5 * x @ dS @ x + x @ S @ dx_dr
        J[0, 1] = 1.0
        J[0, 2:] = x @ S @ B
        J[1, 0] = 1.0
        J[2:, 0] = dx_dr
        J[2:, 2:] = B
        pulled = J.T @ brinkmann_matrix(A, x) @ J
        rosen = np.zeros((k + 2, k + 2))
        rosen[0, 1] = rosen[1, 0] = 1.0
        rosen[2:, 2:] = axis.derivatives([r], 0)[0]
        dev = max_abs(pulled - rosen)
        if dev > worst or not worst_pt:
            worst, worst_pt = max(worst, dev), list(p)
    return IsometryReport(worst, len(pts), seed, worst_pt)


# ---------------------------------------------------------------------------
# Curvature of the Brinkmann wave.


def brinkmann_closed_form_curvature(profile: BrinkmannProfile, u: float, i: int, j: int) -> dict[str, float]:
    """Closed-form nonzero curvature components at a grid node.

    Indices ``i, j`` count transverse directions from 0.  With H_ij = 2A_ij
    and H_iju = 2 dA_ij: Rm_iuuj = −½ H_ij, Ric_uu = −½ ΔH,
    (∇_u Rm)_iuuj = −½ H_iju and (∇_u Ric)_uu = −½ ∂_u ΔH.
    """
    node = profile.grid.node_index(u)
    A, dA = profile.A[node], profile.dA[node]
    return {
        "rm_iuuj": float(-A[i, j]),
        "ric_uu": float(-np.trace(A)),
        "cov_rm_u_iuuj": float(-dA[i, j]),
        "cov_ric_uuu": float(-np.trace(dA)),
    }


def brinkmann_jet(A: np.ndarray, dA: np.ndarray, x: Sequence[float] | None = None):
    """Metric jet (g, ∂g, ∂²g, ∂³g) of 2 du dv + xᵀA(u)x du² + dx² at (v, u, x).

    Terms involving ∂²_u A are dropped, so the third-order jet is exact only
    at x = 0 (the default).
    """
    k = A.shape[0]
    x = np.zeros(k) if x is None else np.asarray(x, dtype=float)
    n = k + 2
    U = 1
    g = brinkmann_matrix(A, x)
    dg = np.zeros((n, n, n))
    d2g = np.zeros((n,) * 4)
    d3g = np.zeros((n,) * 5)
    dg[U, U, U] = x @ dA @ x
    dg[U, U, 2:] = 2 * A @ x
    d2g[U, U, 2:, 2:] = 2 * A
    d2g[U, U, U, 2:] = d2g[U, U, 2:, U] = 2 * dA @ x
    for a in range(2, n):
        for b in range(2, n):
            val = 2 * dA[a - 2, b - 2]
            d3g[U, U, U, a, b] = d3g[U, U, a, U, b] = d3g[U, U, a, b, U] = val
    return g, dg, d2g, d3g


def engine_curvature_at_node(profile: BrinkmannProfile, node: int, x=None):
    """Generic tensor engine applied to the assembled Brinkmann metric."""
    return curvature_from_jet(*brinkmann_jet(profile.A[node], profile.dA[node], x), depth="derivatives")


def brinkmann_metric_spec(A_exprs, coords=("v", "u"), transverse=None) -> MetricSpec:
    """A Brinkmann MetricSpec with H = Σ A_kl(u) x^k x^l from expression entries."""
    k = len(A_exprs)
    transverse = tuple(transverse or (f"x{i + 2}" for i in range(k)))
    H = ex.num(0.0)
    for a in range(k):
        for b in range(k):
            term = ex.mul(A_exprs[a][b], ex.mul(ex.var(transverse[a]), ex.var(transverse[b])))
            H = ex.add(H, term)
    n = k + 2
    zero, one = ex.num(0.0), ex.num(1.0)
    rows = [[zero] * n for _ in range(n)]
    rows[0][1] = rows[1][0] = one
    rows[1][1] = H
    for a in range(k):
        rows[a + 2][a + 2] = one
    return MetricSpec(tuple(coords) + transverse, tuple(map(tuple, rows)), LORENTZIAN, "brinkmann")


# ---------------------------------------------------------------------------
# Obstruction verdicts.


@dataclass
class Verdict:
    name: str
    verdict: str
    magnitude: float
    threshold: float
    witness_u: float
    witness_index: tuple[int, int] | None = None

    def as_dict(self) -> dict:
        d = {
            "name": self.name,
            "verdict": self.verdict,
            "magnitude": self.magnitude,
            "threshold": self.threshold,
            "witness": {"u": self.witness_u},
        }
        if self.witness_index is not None:
            d["witness"]["i"], d["witness"]["j"] = self.witness_index
        return d


@dataclass
class ObstructionReport:
    parallel_ricci: Verdict
    ricci_flat: Verdict
    locally_symmetric: Verdict
    ric_uu_range: tuple[float, float]
    frame: FrameSolution = field(repr=False)
    profile: BrinkmannProfile = field(repr=False)

    @property
    def verdicts(self) -> list[Verdict]:
        return [self.parallel_ricci, self.ricci_flat, self.locally_symmetric]

    @property
    def any_obstructed(self) -> bool:
        return any(v.verdict == OBSTRUCTED for v in self.verdicts)


def _verdict(name, values, threshold, nodes, index_of=None) -> Verdict:
    flat = np.abs(values).reshape(len(nodes), -1)
    per_node = flat.max(axis=1)
    node = int(np.argmax(per_node))
    mag = float(per_node[node])
    idx = None
    if index_of is not None:
        idx = index_of(int(np.argmax(flat[node])))
    verdict = OBSTRUCTED if mag > threshold else INCONCLUSIVE
    return Verdict(name, verdict, mag, float(threshold), float(nodes[node]), idx)


def obstruction_report(
    axis: AxisMetric,
    grid: Grid | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    thresholds: dict[str, float] | None = None,
    mode: str = "exact",
) -> ObstructionReport:
    """Run the Rosen→Brinkmann pipeline and evaluate the three predicates.

    * ricci_flat        ← max_u |ΔH|
    * parallel_ricci    ← max_u |∂_u ΔH|
    * locally_symmetric ← max_{u,i,j} |H_iju|  (some component nonzero)

    A verdict is OBSTRUCTED iff the magnitude exceeds its threshold;
    otherwise INCONCLUSIVE.
    """
    th = {"ricci_flat": threshold, "parallel_ricci": threshold, "locally_symmetric": threshold}
    th.update(thresholds or {})
    frame, profile = rosen_to_brinkmann(axis, grid, mode=mode)
    nodes = profile.grid.nodes
    k = axis.k
    rf = _verdict("ricci_flat", profile.laplacian, th["ricci_flat"], nodes)
    pr = _verdict("parallel_ricci", profile.laplacian_u, th["parallel_ricci"], nodes)
    ls = _verdict(
        "locally_symmetric",
        2.0 * profile.dA,
        th["locally_symmetric"],
        nodes,
        index_of=lambda flat_idx: (flat_idx // k, flat_idx % k),
    )
    ric_uu = -np.trace(profile.A, axis1=1, axis2=2)
    return ObstructionReport(pr, rf, ls, (float(ric_uu.min()), float(ric_uu.max())), frame, profile)
