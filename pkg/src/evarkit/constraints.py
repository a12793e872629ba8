"""Closed-form constraint functions and the built-in constraint families."""
from __future__ import annotations

import numpy as np

from .measure import ConstraintFunction, Hypothesis, SampleGrid


def _p(params: dict, name: str) -> float:
    try:
        return float(params[name])
    except KeyError:
        raise ValueError(f"missing parameter {name!r}") from None


def evaluate(kind: str, params: dict, x):
    """Evaluate a single closed-form constraint at scalar point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    if kind == "affine":
        return _p(params, "slope") * x + params.get("intercept", 0.0)
    if kind == "quadratic":
        return params.get("a", 0.0) * x**2 + params.get("b", 0.0) * x + params.get("c", 0.0)
    if kind == "quantile":
        return _p(params, "alpha") - (x <= _p(params, "q")).astype(float)
    if kind == "indicator":
        return params.get("scale", 1.0) * (x == _p(params, "point")).astype(float)
    raise ValueError(f"unknown constraint kind {kind!r}")


def _expand(kind: str, params: dict) -> list[tuple[str, dict]]:
    """Map a family name to its single-function closed forms."""
    if kind == "mean_var":
        sigma = _p(params, "sigma")
        if sigma <= 0:
            raise ValueError("mean_var needs sigma > 0")
        return [("affine", {"slope": 1.0, "intercept": 0.0}),
                ("affine", {"slope": -1.0, "intercept": 0.0}),
                ("quadratic", {"a": 1.0, "b": 0.0, "c": -sigma**2})]
    if kind == "zero_mean":
        return [("affine", {"slope": 1.0, "intercept": 0.0}),
                ("affine", {"slope": -1.0, "intercept": 0.0})]
    if kind == "bounded_mean":
        m = _p(params, "m")
        if not 0 < m < 1:
            raise ValueError("bounded_mean needs m in (0, 1)")
        return [("affine", {"slope": 1.0, "intercept": -m})]
    if kind == "quantile":
        alpha = _p(params, "alpha")
        _p(params, "q")
        if not 0 < alpha < 1:
            raise ValueError("quantile needs alpha in (0, 1)")
        return [("quantile", dict(params))]
    if kind in ("affine", "quadratic", "indicator"):
        return [(kind, dict(params))]
    raise ValueError(f"unknown constraint kind {kind!r}")


def constraint_functions(kind: str, params: dict, grid: SampleGrid) -> list[ConstraintFunction]:
    if not grid.is_scalar:
        raise ValueError("closed-form constraints need a scalar grid")
    if kind == "bounded_mean" and (grid.points[0] < 0 or grid.points[-1] > 1):
        raise ValueError("bounded_mean lives on [0, 1]; grid leaves that interval")
    return [ConstraintFunction(evaluate(k, p, grid.points), kind=k, params=p)
            for k, p in _expand(kind, params)]


def builtin_constraints(kind: str, params: dict, grid: SampleGrid) -> Hypothesis:
    """Hypothesis for one of ``mean_var``, ``quantile``, ``bounded_mean``, ``zero_mean``."""
    if kind not in ("mean_var", "quantile", "bounded_mean", "zero_mean"):
        raise ValueError(f"unknown built-in family {kind!r}")
    return Hypothesis(grid, tuple(constraint_functions(kind, params, grid)))


def evaluate_affine_candidate(H: Hypothesis, pi, x) -> np.ndarray:
    """``max(0, 1 + sum_i pi_i g_i(x))`` at arbitrary points, using closed forms."""
    x = np.asarray(x, dtype=float)
    total = np.ones_like(x)
    for w, c in zip(np.asarray(pi, dtype=float), H.constraints):
        if c.kind is None:
            raise ValueError("constraint has no closed form; evaluate on the grid instead")
        total = total + w * c(x)
    return np.maximum(total, 0.0)
