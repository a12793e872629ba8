"""Barycenter reduction and the relaxed-integrability hypothesis.

:func:`barycenter_reduce` replaces a discrete measure by one with at most
``m + 1`` atoms matching ``m`` prescribed integrals. The relaxed hypothesis
admits constraints whose integral is ``-inf`` as long as the positive part is
integrable; countable examples are handled through :class:`TailedConstraint`,
which carries the symbolic contribution of the points beyond a truncation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .adversary import worst_case_expectation
from .measure import (DEFAULT_TOL, DiscreteMeasure, EVariable, Hypothesis, SampleGrid,
                      expectation, hypothesis_lp, membership)

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class MomentSpec:
    """Functions ``f_1..f_m`` on a grid and their target integrals."""

    functions: np.ndarray    # (m, n)
    targets: np.ndarray      # (m,)

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.functions, dtype=float))
        t = np.atleast_1d(np.asarray(self.targets, dtype=float)).ravel()
        if F.shape[0] < 1:
            raise ValueError("need at least one moment function")
        if t.size != F.shape[0]:
            raise ValueError(f"{F.shape[0]} functions but {t.size} targets")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(t))):
            raise ValueError("moment functions and targets must be finite")
        object.__setattr__(self, "functions", F)
        object.__setattr__(self, "targets", t)

    @property
    def m(self) -> int:
        return self.functions.shape[0]

    @classmethod
    def from_measure(cls, mu: DiscreteMeasure, functions) -> "MomentSpec":
        F = np.atleast_2d(np.asarray(functions, dtype=float))
        return cls(F, F @ mu.weights)


def moment_residual(nu: DiscreteMeasure, spec: MomentSpec) -> float:
    return float(np.max(np.abs(spec.functions @ nu.weights - spec.targets)))


def barycenter_reduce(mu: DiscreteMeasure, spec: MomentSpec) -> DiscreteMeasure:
    """Carathéodory reduction to a basic solution with at most ``m + 1`` atoms.

    While the moment matrix on the support (with a row of ones for the mass)
    has a kernel, move along the last column of a full QR factorization of
    its transpose until a weight vanishes, the lowest index winning ties.
    The surviving weights are polished by least squares when that keeps
    them nonnegative.
    """
    if spec.functions.shape[1] != len(mu.grid):
        raise ValueError("moment functions do not match the grid")
    w = mu.weights.copy()
    supp = list(np.flatnonzero(w > 0))
    m = spec.m
    if len(supp) <= m + 1:
        return mu
    full = np.vstack([np.ones(len(w)), spec.functions])
    rhs = np.concatenate([[mu.mass], spec.targets])
    while len(supp) > m + 1:
        M = full[:, supp]
        Q, _ = np.linalg.qr(M.T, mode="complete")
        v = Q[:, -1]
        if not np.any(v < 0):
            v = -v
        neg = np.flatnonzero(v < -1e-15)
        ratios = w[supp][neg] / -v[neg]
        t = ratios.min()
        hit = neg[ratios <= t * (1 + 1e-12)]
        k = int(hit.min())
        w[supp] = np.maximum(w[supp] + t * v, 0.0)
        w[supp[k]] = 0.0
        supp = [j for j in supp if w[j] > 0]
    M = full[:, supp]
    polished, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.all(polished > 0):
        old = np.max(np.abs(M @ w[supp] - rhs))
        new = np.max(np.abs(M @ polished - rhs))
        if new <= old:
            w[supp] = polished
    out = np.zeros_like(w)
    out[supp] = w[supp]
    return DiscreteMeasure(mu.grid, out)


def truncate_below(g, c: float) -> np.ndarray:
    """``g v c``, the constraint cut from below at level ``c``."""
    return np.maximum(np.asarray(g, dtype=float), c)


def truncation_level(H: Hypothesis) -> float:
    """A level below every constraint value on the grid."""
    return -float(np.max(np.abs(H.matrix))) - 1.0


@dataclass(frozen=True)
class TailedConstraint:
    """A constraint on a truncated support plus what the rest contributes.

    ``values`` may contain ``-inf``. ``pos_tail`` and ``neg_tail`` are the
    (possibly infinite) integrals of ``g^+`` and ``g^-`` beyond the support.
    """

    values: np.ndarray
    pos_tail: float = 0.0
    neg_tail: float = 0.0
    label: str = ""


def _parts(weights: np.ndarray, c: TailedConstraint) -> tuple[float, float]:
    v = np.asarray(c.values, dtype=float)
    on = weights > 0
    if np.any(np.isnan(v[on])) or np.any(v[on] == np.inf):
        return np.inf, 0.0
    with np.errstate(invalid="ignore"):
        pos = float(np.sum(weights[on] * np.maximum(v[on], 0.0))) + c.pos_tail
        neg = float(np.sum(weights[on] * np.maximum(-v[on], 0.0))) + c.neg_tail
    return pos, neg


def relaxed_integral(weights, c: TailedConstraint) -> float:
    """Integral in ``[-inf, inf]``; ``nan`` when both parts diverge."""
    pos, neg = _parts(np.asarray(weights, dtype=float), c)
    if np.isinf(pos) and np.isinf(neg):
        return float("nan")
    return pos - neg


def _as_tailed(H) -> list[TailedConstraint]:
    if isinstance(H, Hypothesis):
        return [TailedConstraint(g.values) for g in H.constraints]
    return list(H)


def relaxed_membership(mu, H, tol: float = DEFAULT_TOL) -> bool:
    """Every ``g^+`` integrable and ``int g`` in ``[-inf, tol]``."""
    w = mu.weights if isinstance(mu, DiscreteMeasure) else np.asarray(mu, dtype=float)
    for c in _as_tailed(H):
        pos, neg = _parts(w, c)
        if not np.isfinite(pos):
            return False
        if pos - neg > tol:
            return False
    return True


def strict_membership(mu, H, tol: float = DEFAULT_TOL) -> bool:
    """Every ``g`` integrable with ``int g <= tol``."""
    w = mu.weights if isinstance(mu, DiscreteMeasure) else np.asarray(mu, dtype=float)
    for c in _as_tailed(H):
        pos, neg = _parts(w, c)
        if not (np.isfinite(pos) and np.isfinite(neg)) or pos - neg > tol:
            return False
    return True


@dataclass(frozen=True)
class NatDemo:
    """Truncated countable example on ``{1, ..., N}`` with weights ``2^-x``."""

    n: int
    weights: np.ndarray
    f0_partial_sums: np.ndarray      # sum_{x<=k} 2^-x f_0(x) for k = 1..N
    abs_f0_partial_sum: float
    phi_relaxed: bool
    phi_strict: bool
    phi0_relaxed: bool
    phi0_strict: bool
    phi_truncated: bool              # finite-support membership, no tails

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "f0_partial_sums": self.f0_partial_sums.tolist(),
            "f0_partial_sum_at_n": float(self.f0_partial_sums[-1]),
            "abs_f0_partial_sum": self.abs_f0_partial_sum,
            "phi_membership_truncated": self.phi_truncated,
            "phi_relaxed": self.phi_relaxed,
            "phi_strict": self.phi_strict,
            "phi0_relaxed": self.phi0_relaxed,
            "phi0_strict": self.phi0_strict,
        }


def nat_counterexample(N: int = 40) -> NatDemo:
    """``f_n = 1`` off ``n`` with ``f_n(n) = 1 - 2^n``, and ``f_0(x) = -2^x``.

    The single measure ``sum_x 2^-x delta_x`` satisfies every ``f_n``
    constraint (with equality once the tail is counted) while ``int f_0``
    diverges to ``-inf``: relaxed membership survives adding ``f_0``, strict
    membership does not.
    """
    if N < 1:
        raise ValueError("N must be positive")
    x = np.arange(1, N + 1, dtype=float)
    w = 2.0 ** -x
    tail_mass = 2.0 ** -N
    phi = []
    for n in range(1, N + 1):
        v = np.ones(N)
        v[n - 1] = 1.0 - 2.0**n
        phi.append(TailedConstraint(v, pos_tail=tail_mass, label=f"f_{n}"))
    f0_vals = -(2.0**x)
    f0 = TailedConstraint(f0_vals, neg_tail=np.inf, label="f_0")
    partial = np.cumsum(w * f0_vals)
    truncated = [TailedConstraint(c.values) for c in phi]
    return NatDemo(
        n=N, weights=w, f0_partial_sums=partial,
        abs_f0_partial_sum=float(np.sum(w * np.abs(f0_vals))),
        phi_relaxed=relaxed_membership(w, phi, tol=0.0),
        phi_strict=strict_membership(w, phi, tol=0.0),
        phi0_relaxed=relaxed_membership(w, phi + [f0], tol=0.0),
        phi0_strict=strict_membership(w, phi + [f0], tol=0.0),
        phi_truncated=relaxed_membership(w, truncated, tol=0.0),
    )


@dataclass(frozen=True)
class EquivalenceReport:
    trials: int
    passed: int
    failed: int
    max_expectation: float
    max_residual: float
    failures: list = field(default_factory=list)   # trial indices

    @property
    def all_pass(self) -> bool:
        return self.failed == 0

    def to_dict(self) -> dict:
        return {"trials": self.trials, "passed": self.passed, "failed": self.failed,
                "max_expectation": self.max_expectation, "max_residual": self.max_residual}


def _vertex(H: Hypothesis, rng: np.random.Generator) -> np.ndarray | None:
    sol = lpmod.solve(hypothesis_lp(H, rng.standard_normal(len(H.grid))))
    if sol.status != lpmod.OPTIMAL:
        return None
    p = np.maximum(sol.x, 0.0)
    return p / p.sum()


def relaxation_equivalence_check(H: Hypothesis, h: EVariable, trials: int = 200,
                                 seed: int = 0, tol: float = 1e-8) -> EquivalenceReport:
    """Reduce random hypothesis members to ``d + 2`` atoms and re-check them.

    Members are Dirichlet mixtures of LP vertices (which saturate
    constraints); the first trial is the adversarial witness for ``h``.
    Each reduction matches ``h`` and every constraint cut below at a level
    under the grid minimum. A trial passes when the reduced measure is in the
    hypothesis, keeps the expectation of ``h`` and that expectation is at
    most ``1 + tol``.
    """
    rng = np.random.default_rng(seed)
    c = truncation_level(H)
    funcs = np.vstack([h.values] + [truncate_below(g.values, c) for g in H.constraints])
    rep = worst_case_expectation(h, H)
    seeds = [] if rep.witness is None else [rep.witness.weights]
    passed, fails, emax, rmax = 0, [], -np.inf, 0.0
    for t in range(trials):
        if t < len(seeds):
            p = seeds[t]
        else:
            verts = [v for v in (_vertex(H, rng) for _ in range(rng.integers(1, 4))) if v is not None]
            if not verts:
                fails.append(t)
                continue
            lam = rng.dirichlet(np.ones(len(verts)))
            p = lam @ np.array(verts)
        mu = DiscreteMeasure(H.grid, p / p.sum())
        nu = barycenter_reduce(mu, MomentSpec.from_measure(mu, funcs))
        e_mu, e_nu = expectation(mu, h), expectation(nu, h)
        res = abs(e_mu - e_nu)
        rmax = max(rmax, res)
        emax = max(emax, e_nu)
        ok = (membership(nu, H, tol) and res <= RESIDUAL_TOL * max(1.0, abs(e_mu))
              and e_nu <= 1.0 + tol and len(nu.support) <= funcs.shape[0] + 1)
        if ok:
            passed += 1
        else:
            fails.append(t)
    return EquivalenceReport(trials, passed, trials - passed, float(emax), float(rmax), fails)


def reduce_from_json(grid: SampleGrid, weights, functions) -> tuple[DiscreteMeasure, MomentSpec]:
    mu = DiscreteMeasure(grid, weights)
    if not mu.is_probability:
        raise ValueError("measure must have unit mass")
    return mu, MomentSpec.from_measure(mu, functions)
