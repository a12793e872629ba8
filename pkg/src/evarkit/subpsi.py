"""One-sided sub-psi hypotheses and their mixture e-variables.

A distribution is sub-psi when ``E exp(lam X) <= exp(psi(lam))`` for every
``lam`` in the domain ``[0, lam_max]`` of ``psi``. Every e-variable for that
class is dominated by a mixture ``sum_j w_j exp(lam_j x - psi(lam_j))`` with
``w`` a probability vector; this module builds such mixtures, checks the
sub-psi property of discrete measures on a finite ``lam`` grid, and solves
the reverse problem of finding a dominating mixture for a given function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import lp as lpmod
from .measure import VALUE_CAP, DiscreteMeasure, EVariable, SampleGrid

_LOG_CAP = 709.0
_LOG_VALUE_CAP = math.log(VALUE_CAP)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ConstructionError(RuntimeError):
    """A two-point sub-psi measure could not be found."""


@dataclass(frozen=True, eq=False)
class PsiFunction:
    """A nonnegative convex ``psi`` with ``psi(0) = 0`` on ``[0, lam_max]``.

    ``closed`` says whether ``lam_max`` itself is in the domain. ``boundary``
    is the limit of ``psi`` at ``lam_max`` (``inf`` when it blows up).
    """

    kind: str
    params: dict
    lam_max: float
    closed: bool
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    conjugate: Callable[[float], float] | None = field(default=None, repr=False)
    boundary: float = math.inf

    def __post_init__(self):
        check_psi(self)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.full(lam.shape, np.inf)
        inside = (lam >= 0) & ((lam <= self.lam_max) if self.closed else (lam < self.lam_max))
        if np.any(inside):
            out[inside] = self.fn(lam[inside])
        at_edge = (lam == self.lam_max) & ~inside
        out[at_edge] = self.boundary
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params,
                "lam_max": self.lam_max if math.isfinite(self.lam_max) else "inf"}


def check_psi(psi: PsiFunction, n: int = 200) -> None:
    """Raise ``ValueError`` unless ``psi`` is zero at 0, nonnegative, nondecreasing and convex on samples."""
    top = psi.lam_max if math.isfinite(psi.lam_max) else 50.0
    if not psi.closed:
        top *= 1 - 1e-6
    lam = np.linspace(0.0, top, n)
    v = psi.fn(lam)
    if abs(v[0]) > 1e-12:
        raise ValueError("psi(0) must be 0")
    if np.any(v < -1e-12) or np.any(np.diff(v) < -1e-10 * (1 + np.abs(v[1:]))):
        raise ValueError("psi must be nonnegative and nondecreasing")
    mid = psi.fn((lam[:-2] + lam[2:]) / 2)
    if np.any(mid > (v[:-2] + v[2:]) / 2 + 1e-10 * (1 + np.abs(v[2:]))):
        raise ValueError("psi fails the midpoint convexity test")


def gaussian(sigma: float = 1.0) -> PsiFunction:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s2 = sigma * sigma
    return PsiFunction("gaussian", {"sigma": sigma}, math.inf, False,
                       lambda lam: s2 * lam**2 / 2,
                       lambda x: x * x / (2 * s2))


def gamma(shape: float, scale: float) -> PsiFunction:
    """CGF of a centered Gamma(shape, scale) variable."""
    if shape <= 0 or scale <= 0:
        raise ValueError("shape and scale must be positive")
    k, th = shape, scale

    def fn(lam):
        return -k * np.log1p(-th * lam) - k * th * lam

    def conj(x):
        return x / th - k * math.log1p(x / (k * th))

    return PsiFunction("gamma", {"shape": k, "scale": th}, 1.0 / th, False, fn, conj)


def exponential(scale: float = 1.0) -> PsiFunction:
    """CGF of a centered exponential variable with the given scale."""
    psi = gamma(1.0, scale)
    return PsiFunction("exponential", {"scale": scale}, psi.lam_max, False, psi.fn, psi.conjugate)


def table(lams, values) -> PsiFunction:
    """Piecewise-linear ``psi`` through ``(lams, values)`` on the closed domain ``[0, lams[-1]]``."""
    lams = np.asarray(lams, dtype=float)
    values = np.asarray(values, dtype=float)
    if lams.ndim != 1 or lams.size < 2 or lams[0] != 0 or np.any(np.diff(lams) <= 0):
        raise ValueError("table needs increasing lambda nodes starting at 0")
    if values.shape != lams.shape:
        raise ValueError("table values must align with nodes")
    slopes = np.diff(values) / np.diff(lams)
    if np.any(np.diff(slopes) < -1e-12):
        raise ValueError("table is not convex")

    def conj(x):
        return float(np.max(lams * x - values))

    return PsiFunction("custom-table", {"lams": lams.tolist(), "values": values.tolist()},
                       float(lams[-1]), True, lambda lam: np.interp(lam, lams, values),
                       conj, float(values[-1]))


def psi_from_spec(kind: str, **params) -> PsiFunction:
    if kind == "gaussian":
        return gaussian(float(params.get("sigma", 1.0)))
    if kind == "exponential":
        return exponential(float(params.get("scale", 1.0)))
    if kind == "gamma":
        return gamma(float(params["shape"]), float(params["scale"]))
    if kind in ("table", "custom-table"):
        return table(params["lams"], params["values"])
    raise ValueError(f"unknown psi kind {kind!r}")


@dataclass(frozen=True, eq=False)
class LambdaMixture:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if nodes.shape != w.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be aligned 1-d arrays")
        if np.any(nodes < 0) or np.any(w < 0):
            raise ValueError("nodes and weights must be nonnegative")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def is_probability(self) -> bool:
        return abs(self.mass - 1.0) <= 1e-12

    @classmethod
    def dirac(cls, lam: float) -> "LambdaMixture":
        return cls(np.array([lam]), np.array([1.0]))

    def to_dict(self) -> dict:
        return {"nodes": self.nodes.tolist(), "weights": self.weights.tolist()}


def _star_objective(psi: PsiFunction, x: float):
    return lambda lam: lam * x - psi(lam)


def _golden_max(f, a: float, b: float, rel: float = 1e-12) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > rel * (1.0 + abs(a) + abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    lam = (a + b) / 2
    return lam, f(lam)


def psi_star_numeric(psi: PsiFunction, x: float) -> float:
    """``sup_lam lam x - psi(lam)`` by a geometric scan refined with golden-section search."""
    if x <= 0:
        return 0.0
    f = _star_objective(psi, x)
    if math.isfinite(psi.lam_max):
        top = psi.lam_max
    else:
        top = 1.0
        while f(2 * top) > f(top):
            top *= 2
            if top > 1e12:
                return VALUE_CAP
        top *= 2
    nodes = np.unique(np.concatenate([[0.0], top * np.geomspace(1e-10, 1.0, 200),
                                      top * (1 - np.geomspace(1e-12, 1.0, 100))]))
    if not psi.closed and math.isfinite(psi.lam_max):
        nodes = nodes[nodes < psi.lam_max]
    vals = np.array([f(t) for t in nodes])
    i = int(np.argmax(vals))
    lo, hi = nodes[max(i - 1, 0)], nodes[min(i + 1, nodes.size - 1)]
    _, best = _golden_max(f, lo, hi)
    best = max(best, float(vals[i]))
    if psi.closed:
        best = max(best, float(f(psi.lam_max)))
    return min(float(best), VALUE_CAP)


def psi_star(psi: PsiFunction, x: float, numeric: bool = False) -> float:
    """Convex conjugate of ``psi``; 0 for ``x <= 0``, ``VALUE_CAP`` outside its domain."""
    x = float(x)
    if x <= 0:
        return 0.0
    if psi.conjugate is not None and not numeric:
        return min(float(psi.conjugate(x)), VALUE_CAP)
    return psi_star_numeric(psi, x)


def chernoff_bound(psi: PsiFunction, x: float) -> float:
    return math.exp(-psi_star(psi, x))


def _log_tilt(psi: PsiFunction, lam, x) -> np.ndarray:
    """``lam * x - psi(lam)`` broadcast over ``lam`` (rows) and ``x`` (columns)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ps = np.atleast_1d(psi(lam))
    if np.any(~np.isfinite(ps) & (lam != psi.lam_max)):
        raise ValueError("lambda outside the domain of psi")
    with np.errstate(invalid="ignore"):
        out = lam[:, None] * x[None, :] - ps[:, None]
    out[np.isnan(out)] = -np.inf   # 0 * x - inf at a blown-up boundary
    return out


def tilt(psi: PsiFunction, lam, x) -> tuple[np.ndarray, bool]:
    """``exp(lam x - psi(lam))`` as a ``(len(lam), len(x))`` array plus an overflow flag."""
    e = _log_tilt(psi, lam, x)
    over = e > _LOG_VALUE_CAP
    vals = np.exp(np.minimum(e, _LOG_VALUE_CAP))
    vals[over] = VALUE_CAP
    return vals, bool(over.any())


def g_lambda(psi: PsiFunction, lam: float, x, return_flag: bool = False):
    """Constraint ``exp(lam x - psi(lam)) - 1``; ``VALUE_CAP`` on overflow."""
    vals, over = tilt(psi, [lam], x)
    out = vals[0] - 1.0
    out = np.where(vals[0] >= VALUE_CAP, VALUE_CAP, out)
    if np.ndim(x) == 0:
        out = float(out[0])
    return (out, over) if return_flag else out


def mixture_evar(psi: PsiFunction, mixture: LambdaMixture, grid: SampleGrid) -> EVariable:
    """``h(x) = sum_j w_j exp(lam_j x - psi(lam_j))`` on ``grid``."""
    if not mixture.is_probability:
        raise ValueError("mixture weights must sum to one")
    vals, over = tilt(psi, mixture.nodes, grid.points)
    h = mixture.weights @ vals
    return EVariable(grid, np.minimum(h, VALUE_CAP), form="subpsi_mixture",
                     params={"psi": psi.to_dict(), **mixture.to_dict()}, capped=over)


def lambda_cap(psi: PsiFunction, x_max: float) -> float:
    """Largest useful ``lam``: beyond it ``exp(lam x - psi(lam))`` underflows for ``x <= x_max``."""
    if math.isfinite(psi.lam_max):
        return psi.lam_max
    x_max = max(float(x_max), 0.0)

    def excess(lam):
        return float(psi(lam)) - lam * x_max - _LOG_CAP

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2
        if hi > 1e12:
            raise ConstructionError("psi grows too slowly to bound the lambda range")
    lo = 0.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def lambda_grid(psi: PsiFunction, x_max: float = 1.0, n: int = 256, lo_frac: float = 1e-4) -> np.ndarray:
    """Node 0 plus ``n - 1`` geometric nodes up to the cap (``lam_max`` included when finite)."""
    cap = lambda_cap(psi, x_max)
    return np.concatenate([[0.0], cap * np.geomspace(lo_frac, 1.0, n - 1)])


@dataclass(frozen=True)
class SubPsiCheck:
    ok: bool
    max_violation: float          # max over the grid of normalized MGF minus one
    argmax_lambda: float
    overflow: bool


def verify_subpsi(mu: DiscreteMeasure, psi: PsiFunction, lam_grid=None, tol: float = 1e-9) -> SubPsiCheck:
    """Check ``sum_i w_i exp(lam x_i) <= exp(psi(lam)) (1 + tol)`` for every grid ``lam``."""
    if not mu.grid.is_scalar:
        raise ValueError("sub-psi measures live on the real line")
    supp = mu.support
    x = mu.grid.points[supp]
    w = mu.weights[supp]
    if lam_grid is None:
        lam_grid = lambda_grid(psi, x_max=float(x.max()))
    lam_grid = np.asarray(lam_grid, dtype=float)
    e = _log_tilt(psi, lam_grid, x) + np.log(w)[None, :]
    top = e.max(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        log_m = top[:, 0] + np.log(np.exp(e - top).sum(axis=1))
    log_m[np.isneginf(top[:, 0])] = -np.inf
    overflow = bool(np.any(log_m > _LOG_VALUE_CAP))
    viol = np.expm1(np.minimum(log_m, _LOG_VALUE_CAP))
    k = int(np.argmax(viol))
    return SubPsiCheck(bool(np.all(viol <= tol)), float(viol[k]), float(lam_grid[k]), overflow)


def two_point_subpsi(psi: PsiFunction, x0: float, p: float, lam_grid=None, y_limit: float = 1e12) -> DiscreteMeasure:
    """``p delta_{x0} + (1 - p) delta_{-x0-y}`` with ``y`` large enough to be sub-psi.

    Requires ``p <= exp(-psi*(x0)) / 2``. For ``x0 <= 0`` the choice
    ``y = -x0`` works outright; otherwise ``y`` doubles from 1 until the
    measure passes :func:`verify_subpsi`.
    """
    x0 = float(x0)
    star = psi_star(psi, x0)
    if star >= VALUE_CAP:
        raise ValueError("x0 is outside the domain of psi*")
    p_max = 0.5 * math.exp(-star)
    if not 0.0 <= p <= p_max * (1 + 1e-12):
        raise ValueError(f"p must lie in [0, {p_max}]")

    def build(y):
        other = -x0 - y
        if other == x0:
            return DiscreteMeasure(SampleGrid([x0]), [1.0])
        pts, w = ([other, x0], [1 - p, p]) if other < x0 else ([x0, other], [p, 1 - p])
        return DiscreteMeasure(SampleGrid(pts), w)

    if x0 <= 0:
        return build(-x0)
    grid = lam_grid if lam_grid is not None else lambda_grid(psi, x_max=x0)
    y = 1.0
    while y <= y_limit:
        nu = build(y)
        if verify_subpsi(nu, psi, grid).ok:
            return nu
        y *= 2
    raise ConstructionError(f"no sub-psi two-point measure found up to y = {y_limit:g}")


def tail_probability(mu: DiscreteMeasure, x: float) -> float:
    """Exact ``P(X >= x)`` under a discrete measure."""
    return float(mu.weights[mu.grid.points >= x].sum())


@dataclass(frozen=True)
class MixtureFit:
    """Result of :func:`dominate_by_mixture`.

    If infeasible, ``witness`` is a probability vector on the x grid with
    ``E[exp(lam_j X - psi(lam_j))] <= level`` for all nodes but
    ``E[h] > level``.
    """

    feasible: bool
    mixture: LambdaMixture | None = None
    witness: np.ndarray | None = None
    level: float | None = None


def dominate_by_mixture(h, psi: PsiFunction, lam_grid, x_grid: SampleGrid | None = None) -> MixtureFit:
    """Probability weights on ``lam_grid`` (node 0 added if absent) whose mixture dominates ``h`` on the x grid.

    ``h`` is an :class:`EVariable` or a callable evaluated on ``x_grid``.
    Among feasible mixtures the one with the smallest mean ``lam`` is returned.
    """
    if isinstance(h, EVariable):
        x_grid = h.grid
        hv = h.values
    else:
        if x_grid is None:
            raise ValueError("x_grid is required when h is a callable")
        hv = np.asarray(h(x_grid.points), dtype=float)
    x = x_grid.points
    if any(psi_star(psi, xi) >= VALUE_CAP for xi in x[x > 0]):
        raise ValueError("x grid leaves the domain of psi*")
    lam = np.unique(np.concatenate([[0.0], np.asarray(lam_grid, dtype=float)]))
    K, _ = tilt(psi, lam, x)           # (n_lam, n_x)
    prog = lpmod.LinearProgram(c=-lam, A_ub=-K.T, b_ub=-hv,
                               A_eq=np.ones((1, lam.size)), b_eq=[1.0])
    sol = lpmod.solve(prog)
    if sol.status == lpmod.OPTIMAL:
        w = np.maximum(sol.x, 0.0)
        keep = w > 0
        return MixtureFit(True, LambdaMixture(lam[keep], w[keep] / w.sum()))
    if sol.status != lpmod.INFEASIBLE:
        raise lpmod.NumericalStallError(f"mixture LP returned {sol.status}")
    y = np.maximum(sol.farkas_ub, 0.0)
    z = float(sol.farkas_eq[0])
    s = y.sum()
    return MixtureFit(False, witness=y / s if s > 0 else y, level=z / s if s > 0 else None)
