"""Finite sample spaces, measures, constraint functions and hypotheses."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import lp as lpmod

VALUE_CAP = 1e300
DEFAULT_TOL = 1e-9


class AlignmentError(ValueError):
    """Two objects that must live on the same grid do not."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Ordered, duplicate-free set of points standing in for the sample space.

    Scalar grids are stored as shape ``(n,)`` and must be strictly
    increasing; vector grids as ``(n, d)`` with distinct rows.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 0 or pts.shape[0] == 0:
            raise ValueError("grid must be nonempty")
        if pts.ndim > 2:
            raise ValueError("grid points must be scalars or flat vectors")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if pts.ndim == 1:
            if np.any(np.diff(pts) <= 0):
                raise ValueError("scalar grid must be strictly increasing")
        elif len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("grid has duplicate points")
        object.__setattr__(self, "points", _frozen(pts))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]

    @property
    def is_scalar(self) -> bool:
        return self.points.ndim == 1

    def digest(self) -> str:
        """Stable short hash of the grid, embedded in reports."""
        h = hashlib.sha256()
        h.update(str(self.points.shape).encode())
        h.update(np.ascontiguousarray(self.points, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def same_as(self, other: "SampleGrid") -> bool:
        return self is other or (self.points.shape == other.points.shape
                                 and np.array_equal(self.points, other.points))

    def index_of(self, x) -> int:
        """Index of the grid point equal to ``x`` (exact match)."""
        x = np.asarray(x, dtype=float)
        if self.is_scalar:
            hits = np.flatnonzero(self.points == x)
        else:
            hits = np.flatnonzero(np.all(self.points == x, axis=1))
        if hits.size == 0:
            raise KeyError(f"{x!r} is not a grid point")
        return int(hits[0])

    def nearest(self, x) -> tuple[int, float]:
        """Index of the nearest grid point and its distance to ``x``."""
        x = np.asarray(x, dtype=float)
        if self.is_scalar:
            dist = np.abs(self.points - float(x))
        else:
            dist = np.linalg.norm(self.points - x, axis=1)
        i = int(np.argmin(dist))
        return i, float(dist[i])


@dataclass(frozen=True, eq=False)
class ConstraintFunction:
    """One constraint ``g``; ``kind``/``params`` optionally describe a closed form."""

    values: np.ndarray
    kind: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("constraint values must be finite")
        object.__setattr__(self, "values", _frozen(v))

    def __call__(self, x):
        if self.kind is None:
            raise ValueError("constraint has no closed form")
        from .constraints import evaluate
        return evaluate(self.kind, self.params, x)


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """Probability measures on ``grid`` integrating every constraint to <= 0."""

    grid: SampleGrid
    constraints: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        cons = tuple(c if isinstance(c, ConstraintFunction) else ConstraintFunction(c)
                     for c in self.constraints)
        if not cons:
            raise ValueError("a hypothesis needs at least one constraint")
        for c in cons:
            if c.values.size != len(self.grid):
                raise AlignmentError("constraint length does not match grid")
        object.__setattr__(self, "constraints", cons)

    @property
    def matrix(self) -> np.ndarray:
        """Constraint values as a ``(d, n)`` array."""
        if "matrix" not in self._cache:
            self._cache["matrix"] = _frozen(np.vstack([c.values for c in self.constraints]))
        return self._cache["matrix"]

    def __len__(self) -> int:
        return len(self.constraints)

    def rescaled(self, factors: Sequence[float]) -> "Hypothesis":
        factors = np.asarray(factors, dtype=float)
        if np.any(factors <= 0):
            raise ValueError("scale factors must be positive")
        return Hypothesis(self.grid, tuple(ConstraintFunction(c.values * f) for c, f in zip(self.constraints, factors)))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    grid: SampleGrid
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size != len(self.grid):
            raise AlignmentError("weights do not match grid")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def is_probability(self) -> bool:
        return abs(self.mass - 1.0) <= 1e-12

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    @classmethod
    def dirac(cls, grid: SampleGrid, index: int) -> "DiscreteMeasure":
        w = np.zeros(len(grid))
        w[index] = 1.0
        return cls(grid, w)

    @classmethod
    def uniform(cls, grid: SampleGrid) -> "DiscreteMeasure":
        return cls(grid, np.full(len(grid), 1.0 / len(grid)))


@dataclass(frozen=True, eq=False)
class EVariable:
    """A nonnegative function on a grid with a tag describing how it was built.

    ``form`` is one of ``raw``, ``affine_in_constraints``, ``subpsi_mixture``
    or ``symmetry``; ``params`` carries the data of that form (``pi``, the
    mixture, ...). ``clipped`` records that negative values were cut to zero
    at some non-negligible point, ``capped`` that values hit ``VALUE_CAP``.
    """

    grid: SampleGrid
    values: np.ndarray
    form: str = "raw"
    params: dict = field(default_factory=dict)
    clipped: bool = False
    capped: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != len(self.grid):
            raise AlignmentError("values do not match grid")
        if np.any(np.isnan(v)) or np.any(v < 0):
            raise ValueError("e-variable values must be nonnegative")
        capped = self.capped or bool(np.any(v >= VALUE_CAP))
        object.__setattr__(self, "values", _frozen(np.minimum(v, VALUE_CAP)))
        object.__setattr__(self, "capped", capped)

    @classmethod
    def constant(cls, grid: SampleGrid, c: float) -> "EVariable":
        return cls(grid, np.full(len(grid), float(c)))


def _values(f) -> np.ndarray:
    if isinstance(f, (ConstraintFunction, EVariable)):
        return f.values
    return np.asarray(f, dtype=float).ravel()


def expectation(mu: DiscreteMeasure, f) -> float:
    """``sum_i mu_i f_i`` for a vector, constraint or e-variable ``f``."""
    fv = _values(f)
    if fv.size != mu.weights.size:
        raise AlignmentError(f"measure has {mu.weights.size} atoms, function {fv.size} values")
    if isinstance(f, EVariable) and not f.grid.same_as(mu.grid):
        raise AlignmentError("e-variable and measure live on different grids")
    return float(mu.weights @ fv)


def membership(mu: DiscreteMeasure, H: Hypothesis, tol: float = DEFAULT_TOL) -> bool:
    if not mu.grid.same_as(H.grid):
        raise AlignmentError("measure and hypothesis live on different grids")
    return bool(np.all(H.matrix @ mu.weights <= tol))


def hypothesis_lp(H: Hypothesis, objective) -> lpmod.LinearProgram:
    """``max objective @ p`` over probability vectors ``p`` in the discretized hypothesis."""
    n = len(H.grid)
    return lpmod.LinearProgram(c=objective, A_ub=H.matrix, b_ub=np.zeros(len(H)),
                               A_eq=np.ones((1, n)), b_eq=[1.0])


def negligible_points(H: Hypothesis, tol: float = DEFAULT_TOL) -> frozenset:
    """Indices of grid points that no measure in the hypothesis can charge.

    Point ``i`` is negligible when ``max p_i`` over the discretized
    hypothesis is at most ``tol``. Every point is negligible for an empty
    hypothesis.
    """
    key = ("negligible", tol)
    if key in H._cache:
        return H._cache[key]
    n = len(H.grid)
    charged = np.zeros(n, dtype=bool)
    negligible = set()
    for i in range(n):
        if charged[i]:
            continue
        c = np.zeros(n)
        c[i] = 1.0
        sol = lpmod.solve(hypothesis_lp(H, c))
        if sol.status == lpmod.INFEASIBLE:
            negligible = set(range(n))
            break
        if sol.value <= tol:
            negligible.add(i)
        # any atom of an optimal vertex is chargeable too
        charged |= sol.x > tol
    result = frozenset(negligible)
    H._cache[key] = result
    return result


def non_negligible_mask(H: Hypothesis, tol: float = DEFAULT_TOL) -> np.ndarray:
    mask = np.ones(len(H.grid), dtype=bool)
    mask[list(negligible_points(H, tol))] = False
    return mask


def is_empty(H: Hypothesis) -> bool:
    return lpmod.solve(hypothesis_lp(H, np.zeros(len(H.grid)))).status == lpmod.INFEASIBLE


# -- JSON -------------------------------------------------------------------

def grid_from_json(spec: Any) -> SampleGrid:
    """Build a grid from a list of points or ``{"start", "stop", "step"}``."""
    if isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except KeyError as exc:
            raise ValueError(f"grid range needs start/stop/step, missing {exc}") from None
        if step <= 0 or stop < start:
            raise ValueError("grid range must have step > 0 and stop >= start")
        n = int(round((stop - start) / step)) + 1
        return SampleGrid(start + step * np.arange(n))
    return SampleGrid(np.asarray(spec, dtype=float))


def grid_to_json(grid: SampleGrid) -> list:
    return grid.points.tolist()


def hypothesis_from_json(grid: SampleGrid, specs: list) -> Hypothesis:
    from .constraints import constraint_functions
    if not isinstance(specs, list) or not specs:
        raise ValueError("constraints must be a nonempty list")
    cons = []
    for s in specs:
        if "values" in s:
            cons.append(ConstraintFunction(s["values"]))
        elif "kind" in s:
            cons.extend(constraint_functions(s["kind"], s.get("params", {}), grid))
        else:
            raise ValueError(f"constraint entry needs 'kind' or 'values': {s!r}")
    return Hypothesis(grid, tuple(cons))


def hypothesis_to_json(H: Hypothesis) -> list:
    out = []
    for c in H.constraints:
        if c.kind is not None:
            out.append({"kind": c.kind, "params": dict(c.params)})
        else:
            out.append({"values": c.values.tolist()})
    return out


def problem_from_json(doc: dict) -> tuple[SampleGrid, Hypothesis | None, DiscreteMeasure | None]:
    """Parse ``{"grid": ..., "constraints": [...], "weights": [...]}``."""
    grid = grid_from_json(doc["grid"])
    H = hypothesis_from_json(grid, doc["constraints"]) if "constraints" in doc else None
    mu = DiscreteMeasure(grid, doc["weights"]) if "weights" in doc else None
    return grid, H, mu


def problem_to_json(grid: SampleGrid, H: Hypothesis | None = None, mu: DiscreteMeasure | None = None) -> dict:
    doc: dict = {"grid": grid_to_json(grid)}
    if H is not None:
        doc["constraints"] = hypothesis_to_json(H)
    if mu is not None:
        doc["weights"] = mu.weights.tolist()
    return doc
