"""Worst-case expectation of a candidate over the discretized hypothesis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp as lpmod
from .finite import check_constraint_qualification
from .measure import (DEFAULT_TOL, DiscreteMeasure, EVariable, Hypothesis,
                      hypothesis_lp, non_negligible_mask)

E_VARIABLE = "e-variable"
VIOLATED = "violated"
HYPOTHESIS_EMPTY = "hypothesis-empty"

MAXIMAL = "maximal"
DOMINATED = "dominated"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class VerificationReport:
    worst_value: float | None
    witness: DiscreteMeasure | None
    verdict: str
    slack: np.ndarray | None     # -E_witness[g_i], one entry per constraint
    grid_hash: str

    def to_dict(self) -> dict:
        return {
            "worst_value": self.worst_value,
            "verdict": self.verdict,
            "witness": None if self.witness is None else self.witness.weights.tolist(),
            "slack": None if self.slack is None else self.slack.tolist(),
            "grid_hash": self.grid_hash,
        }


def _check_grid(h: EVariable, H: Hypothesis):
    if not h.grid.same_as(H.grid):
        raise ValueError("e-variable and hypothesis live on different grids")


def worst_case_expectation(h: EVariable, H: Hypothesis, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Maximize ``E_p[h]`` over probability vectors ``p`` with ``E_p[g_i] <= 0``."""
    _check_grid(h, H)
    sol = lpmod.solve(hypothesis_lp(H, h.values))
    gh = H.grid.digest()
    if sol.status == lpmod.INFEASIBLE:
        return VerificationReport(None, None, HYPOTHESIS_EMPTY, None, gh)
    if sol.status != lpmod.OPTIMAL:
        raise lpmod.NumericalStallError(f"adversarial LP returned {sol.status}")
    p = np.maximum(sol.x, 0.0)
    witness = DiscreteMeasure(H.grid, p / p.sum())
    worst = float(witness.weights @ h.values)
    verdict = E_VARIABLE if worst <= 1.0 + tol else VIOLATED
    return VerificationReport(worst, witness, verdict, -(H.matrix @ witness.weights), gh)


def is_evar_on_grid(h: EVariable, H: Hypothesis, tol: float = DEFAULT_TOL) -> bool:
    return worst_case_expectation(h, H, tol).verdict != VIOLATED


@dataclass(frozen=True)
class MaximalityResult:
    verdict: str
    dominator: EVariable | None = None
    pi: np.ndarray | None = None
    point: int | None = None
    grid_hash: str = ""


def maximality_check(h: EVariable, H: Hypothesis, tol: float = DEFAULT_TOL) -> MaximalityResult:
    """Look for an affine e-variable ``1 + sum pi_i g_i >= h`` that is strictly larger somewhere.

    One LP per non-negligible grid point maximizes the gap there. A gap
    above ``tol`` gives ``dominated``; otherwise the verdict is ``maximal``
    when the constraint qualification holds and ``undetermined`` when not.
    """
    _check_grid(h, H)
    gh = H.grid.digest()
    if not is_evar_on_grid(h, H, tol):
        raise ValueError("maximality is only defined for e-variables")
    mask = non_negligible_mask(H, tol)
    idx = np.flatnonzero(mask)
    G = H.matrix[:, mask]
    hv = h.values[mask]
    # 1 + pi @ G >= h  <=>  -G.T pi <= 1 - h
    A_ub, b_ub = -G.T, 1.0 - hv
    for k, j in enumerate(idx):
        sol = lpmod.solve(lpmod.LinearProgram(c=G[:, k], A_ub=A_ub, b_ub=b_ub))
        if sol.status == lpmod.INFEASIBLE:
            # no affine dominator at all cannot happen for an e-variable up to tolerance
            continue
        if sol.status == lpmod.UNBOUNDED:
            pi = np.maximum(sol.x + sol.ray, 0.0)
        else:
            pi = np.maximum(sol.x, 0.0)
        cand = 1.0 + pi @ H.matrix
        if cand[j] - h.values[j] > tol:
            dom = EVariable(H.grid, np.maximum(cand, 0.0), form="affine_in_constraints",
                            params={"pi": pi.tolist()})
            if is_evar_on_grid(dom, H, tol):
                return MaximalityResult(DOMINATED, dom, pi, int(j), gh)
    if check_constraint_qualification(H, tol):
        return MaximalityResult(MAXIMAL, grid_hash=gh)
    return MaximalityResult(UNDETERMINED, grid_hash=gh)
