"""Finitely generated hypotheses.

For ``Phi = {g_1, ..., g_d}`` the e-variables are exactly the nonnegative
functions dominated off negligible points by ``1 + sum_i pi_i g_i`` with
``pi >= 0``. This module builds those candidates, tests the nonnegativity
region of ``pi``, recovers dominating weights for a given function and
checks the constraint qualification under which the candidates are maximal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp as lpmod
from .constraints import builtin_constraints  # noqa: F401  (re-exported)
from .measure import (DEFAULT_TOL, DiscreteMeasure, EVariable, Hypothesis,
                      negligible_points, non_negligible_mask)


def as_pi(pi, H: Hypothesis) -> np.ndarray:
    pi = np.atleast_1d(np.asarray(pi, dtype=float)).ravel()
    if pi.size != len(H):
        raise ValueError(f"pi has {pi.size} entries, hypothesis has {len(H)} constraints")
    if np.any(pi < 0) or not np.all(np.isfinite(pi)):
        raise ValueError("pi must be finite and nonnegative")
    return pi


@dataclass(frozen=True)
class MeanVarParams:
    sigma: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def pi(self) -> np.ndarray:
        """Weights on ``(x, -x, x^2 - sigma^2)``; requires ``beta >= 0``."""
        if self.beta < 0:
            raise ValueError("beta must be nonnegative to map onto pi")
        return np.array([max(self.alpha, 0.0), max(-self.alpha, 0.0), self.beta / self.sigma**2])

    def candidate(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 + self.alpha * x + self.beta * (x**2 / self.sigma**2 - 1.0)


def affine_values(pi, H: Hypothesis) -> np.ndarray:
    """Unclipped ``1 + sum_i pi_i g_i`` on the grid."""
    return 1.0 + as_pi(pi, H) @ H.matrix


def candidate_evar(pi, H: Hypothesis, tol: float = DEFAULT_TOL) -> EVariable:
    raw = affine_values(pi, H)
    mask = non_negligible_mask(H, tol)
    clipped = bool(np.any(raw[mask] < -tol))
    return EVariable(H.grid, np.maximum(raw, 0.0), form="affine_in_constraints",
                     params={"pi": as_pi(pi, H).tolist()}, clipped=clipped)


def in_pi_phi(pi, H: Hypothesis, tol: float = DEFAULT_TOL) -> bool:
    raw = affine_values(pi, H)
    mask = non_negligible_mask(H, tol)
    return bool(np.all(raw[mask] >= -tol))


def mean_var_maximal(params: MeanVarParams) -> bool:
    """Ellipse test ``sigma^2 alpha^2 + (2 beta - 1)^2 <= 1``."""
    return params.sigma**2 * params.alpha**2 + (2 * params.beta - 1) ** 2 <= 1.0


def mean_var_grid_minimum(params: MeanVarParams, half_width: float = 10.0, step: float = 0.01) -> float:
    """Minimum of the mean-variance candidate over ``[-w sigma, w sigma]`` at spacing ``step*sigma``."""
    n = int(round(2 * half_width / step)) + 1
    x = params.sigma * np.linspace(-half_width, half_width, n)
    return float(params.candidate(x).min())


@dataclass(frozen=True)
class Domination:
    """Outcome of :func:`dominating_weights`.

    When infeasible, ``witness`` is a probability measure in the discretized
    hypothesis under which the function has expectation above one (the
    normalized Farkas multipliers of the LP).
    """

    feasible: bool
    pi: np.ndarray | None = None
    witness: DiscreteMeasure | None = None


def dominating_weights(h: EVariable, H: Hypothesis, tol: float = DEFAULT_TOL) -> Domination:
    """Smallest-``sum(pi)`` weights with ``h - 1 - tol <= sum_i pi_i g_i`` off negligible points."""
    if not h.grid.same_as(H.grid):
        raise ValueError("e-variable and hypothesis live on different grids")
    mask = non_negligible_mask(H, tol)
    d = len(H)
    if not mask.any():
        return Domination(True, np.zeros(d))
    G = H.matrix[:, mask]
    prog = lpmod.LinearProgram(c=-np.ones(d), A_ub=-G.T, b_ub=1.0 + tol - h.values[mask])
    sol = lpmod.solve(prog)
    if sol.status == lpmod.OPTIMAL:
        return Domination(True, np.maximum(sol.x, 0.0))
    if sol.status != lpmod.INFEASIBLE:
        raise lpmod.NumericalStallError(f"unexpected LP status {sol.status}")
    q = np.zeros(len(H.grid))
    q[mask] = np.maximum(sol.farkas_ub, 0.0)
    witness = DiscreteMeasure(H.grid, q / q.sum()) if q.sum() > 0 else None
    return Domination(False, None, witness)


def check_constraint_qualification(H: Hypothesis, tol: float = DEFAULT_TOL) -> bool:
    """False iff two ordered conic combinations differ at some non-negligible point.

    For each non-negligible point ``j`` maximize ``sum_i (pi'_i - pi_i) g_i(x_j)``
    subject to the same combination being ``>= 0`` at every non-negligible
    point and ``sum(pi) + sum(pi') <= 1``.
    """
    key = ("cq", tol)
    if key in H._cache:
        return H._cache[key]
    mask = non_negligible_mask(H, tol)
    G = H.matrix[:, mask]
    d, k = G.shape
    A_ub = np.vstack([np.hstack([G.T, -G.T]), np.ones((1, 2 * d))])
    b_ub = np.concatenate([np.zeros(k), [1.0]])
    ok = True
    for j in range(k):
        c = np.concatenate([-G[:, j], G[:, j]])
        sol = lpmod.solve(lpmod.LinearProgram(c=c, A_ub=A_ub, b_ub=b_ub))
        if sol.value > tol:
            ok = False
            break
    H._cache[key] = ok
    return ok


def pi_interval(kind: str, params: dict) -> tuple[float, float] | None:
    """Closed-form range of the single weight for the one-constraint families."""
    if kind == "quantile":
        return 0.0, 1.0 / (1.0 - float(params["alpha"]))
    if kind == "bounded_mean":
        # nonnegative weights only: a negative weight on x - m is not an e-variable for mean <= m
        return 0.0, 1.0 / float(params["m"])
    return None

