"""Finite group actions on grids, orbit averages and exact e-variables.

A group element is stored as a permutation ``perm`` of grid indices with
``perm[i]`` the index of ``sigma(x_i)``. Under this convention the pullback
``sigma^* f`` is ``f[perm]``, the pushforward of ``mu`` moves the weight at
``i`` to ``perm[i]`` and the composite ``sigma_1 sigma_2`` is ``perm1[perm2]``.
Averages use the normalized counting measure on the group.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .measure import (DEFAULT_TOL, ConstraintFunction, DiscreteMeasure, EVariable,
                      Hypothesis, SampleGrid)


class GroupError(ValueError):
    pass


def _as_perm(p, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=np.intp).ravel()
    if p.size != n or not np.array_equal(np.sort(p), np.arange(n)):
        raise GroupError("group element is not a bijection of grid indices")
    return p


def _closure(gens: list[np.ndarray], n: int) -> list[np.ndarray]:
    """Subgroup generated by ``gens``, identity first, in BFS order."""
    ident = np.arange(n)
    seen = {ident.tobytes(): ident}
    order = [ident]
    frontier = [ident]
    while frontier:
        nxt = []
        for g in frontier:
            for s in gens:
                h = s[g]
                key = h.tobytes()
                if key not in seen:
                    seen[key] = h
                    order.append(h)
                    nxt.append(h)
        frontier = nxt
    return order


@dataclass(frozen=True, eq=False)
class FiniteGroupAction:
    """A finite group acting on the indices of ``grid`` by permutations."""

    grid: SampleGrid
    elements: tuple
    generators: tuple = ()      # indices into ``elements``
    identity: int = 0

    def __post_init__(self):
        n = len(self.grid)
        elems = tuple(_as_perm(p, n) for p in self.elements)
        if not elems:
            raise GroupError("group has no elements")
        index = {p.tobytes(): k for k, p in enumerate(elems)}
        if len(index) != len(elems):
            raise GroupError("repeated group element")
        if not np.array_equal(elems[self.identity], np.arange(n)):
            raise GroupError("identity index does not hold the identity permutation")
        for a in elems:
            inv = np.empty(n, dtype=np.intp)
            inv[a] = np.arange(n)
            if inv.tobytes() not in index:
                raise GroupError("not closed under inverses")
            for b in elems:
                if a[b].tobytes() not in index:
                    raise GroupError("not closed under composition")
        for k in self.generators:
            if not 0 <= k < len(elems):
                raise GroupError(f"generator index {k} out of range")
        for p in elems:
            p.setflags(write=False)
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "generators", tuple(int(k) for k in self.generators))

    @classmethod
    def generated(cls, grid: SampleGrid, gens) -> "FiniteGroupAction":
        n = len(grid)
        gens = [_as_perm(g, n) for g in gens]
        elems = _closure(gens, n)
        keys = [e.tobytes() for e in elems]
        return cls(grid, tuple(elems), tuple(keys.index(g.tobytes()) for g in gens), 0)

    @classmethod
    def trivial(cls, grid: SampleGrid) -> "FiniteGroupAction":
        return cls(grid, (np.arange(len(grid)),), (0,), 0)

    @property
    def order(self) -> int:
        return len(self.elements)

    def generator_perms(self) -> list[np.ndarray]:
        return [self.elements[k] for k in self.generators]

    def perm_matrix(self) -> np.ndarray:
        """``(|G|, n)`` array of all permutations."""
        return np.stack(self.elements)


def point_map(grid: SampleGrid, fn) -> np.ndarray:
    """Permutation induced on ``grid`` by a point map; the grid must be closed under it."""
    pts = grid.points if not grid.is_scalar else grid.points[:, None]
    lookup = {tuple(p): i for i, p in enumerate(pts)}
    perm = np.empty(len(grid), dtype=np.intp)
    for i, p in enumerate(pts):
        q = tuple(np.asarray(fn(p), dtype=float))
        if q not in lookup:
            raise GroupError(f"grid is not closed under the action: {tuple(p)} -> {q}")
        perm[i] = lookup[q]
    return perm


def product_grid(values, d: int) -> SampleGrid:
    """All ``d``-tuples over ``values`` in lexicographic order."""
    vals = np.asarray(values, dtype=float).ravel()
    return SampleGrid(np.array(list(itertools.product(vals, repeat=d)), dtype=float))


def coordinate_permutations(grid: SampleGrid) -> FiniteGroupAction:
    """Symmetric group permuting the coordinates, generated by adjacent transpositions."""
    d = grid.dim
    gens = []
    for k in range(d - 1):
        order = list(range(d))
        order[k], order[k + 1] = order[k + 1], order[k]
        gens.append(point_map(grid, lambda p, o=order: p[o]))
    if not gens:
        return FiniteGroupAction.trivial(grid)
    return FiniteGroupAction.generated(grid, gens)


def cyclic_shift(grid: SampleGrid, n: int) -> FiniteGroupAction:
    """Cyclic group of order ``n`` rotating the ``n`` coordinates."""
    if grid.dim != n:
        raise GroupError(f"cyclic:{n} needs {n}-dimensional grid points, got {grid.dim}")
    return FiniteGroupAction.generated(grid, [point_map(grid, lambda p: np.roll(p, 1))])


def sign_flips(grid: SampleGrid, d: int) -> FiniteGroupAction:
    """``(Z/2)^d`` flipping the sign of each coordinate."""
    if grid.dim != d:
        raise GroupError(f"signs:{d} needs {d}-dimensional grid points, got {grid.dim}")
    gens = []
    for k in range(d):
        s = np.ones(d)
        s[k] = -1.0
        gens.append(point_map(grid, lambda p, s=s: (np.asarray(p) * s) + 0.0))
    return FiniteGroupAction.generated(grid, gens)


def group_from_name(name: str, grid: SampleGrid) -> FiniteGroupAction:
    """``s2``, ``s3``, ... (``s_n``), ``cyclic:n`` or ``signs:d``."""
    name = name.strip().lower()
    if name.startswith("s") and name[1:].isdigit():
        n = int(name[1:])
        if grid.dim != n:
            raise GroupError(f"{name} needs {n}-dimensional grid points, got {grid.dim}")
        return coordinate_permutations(grid)
    kind, _, arg = name.partition(":")
    if kind == "cyclic" and arg.isdigit():
        return cyclic_shift(grid, int(arg))
    if kind == "signs" and arg.isdigit():
        return sign_flips(grid, int(arg))
    raise GroupError(f"unknown group {name!r}")


def _check(G: FiniteGroupAction, n: int):
    if n != len(G.grid):
        raise GroupError(f"vector has {n} entries, grid has {len(G.grid)} points")


def orbit_average(f, G: FiniteGroupAction) -> np.ndarray:
    """``f_pi(x) = |G|^{-1} sum_sigma f(sigma x)``."""
    f = np.asarray(f.values if hasattr(f, "values") else f, dtype=float).ravel()
    _check(G, f.size)
    return f[G.perm_matrix()].mean(axis=0)


def pushforward(mu: DiscreteMeasure, perm: np.ndarray) -> DiscreteMeasure:
    w = np.zeros_like(mu.weights)
    w[perm] = mu.weights
    return DiscreteMeasure(mu.grid, w)


def symmetrize_measure(mu: DiscreteMeasure, G: FiniteGroupAction) -> DiscreteMeasure:
    """``mu_pi = |G|^{-1} sum_sigma sigma_* mu``."""
    _check(G, mu.weights.size)
    w = np.zeros_like(mu.weights)
    for p in G.elements:
        np.add.at(w, p, mu.weights)
    return DiscreteMeasure(mu.grid, w / G.order)


def is_invariant(mu: DiscreteMeasure, G: FiniteGroupAction, tol: float = 1e-12) -> bool:
    return all(np.max(np.abs(pushforward(mu, p).weights - mu.weights)) <= tol
               for p in G.elements)


def exact_evar(f, G: FiniteGroupAction) -> EVariable:
    """``1 + c (f - f_pi)`` with the largest ``c <= 1`` keeping it nonnegative.

    Its expectation is exactly one under every invariant measure.
    """
    f = np.asarray(f, dtype=float).ravel()
    if not np.all(np.isfinite(f)):
        raise ValueError("f must be finite on the grid")
    u = f - orbit_average(f, G)
    lo = float(u.min())
    c = 1.0 if lo >= -1.0 else 1.0 / -lo
    return EVariable(G.grid, np.maximum(1.0 + c * u, 0.0), form="symmetry",
                     params={"c": c, "group_order": G.order})


@dataclass(frozen=True)
class Envelope:
    """Outcome of :func:`evar_upper_envelope`; ``envelope`` is set only for e-variables."""

    f_pi: np.ndarray
    verdict: str
    envelope: EVariable | None


def evar_upper_envelope(h: EVariable, G: FiniteGroupAction, tol: float = DEFAULT_TOL) -> Envelope:
    """Decide whether ``h`` is an e-variable for the invariant measures.

    With ``f = h - 1`` it is one iff ``f_pi <= 0``, and then ``h`` sits below
    the exact e-variable ``1 + f - f_pi``.
    """
    hv = h.values if isinstance(h, EVariable) else np.asarray(h, dtype=float).ravel()
    if np.any(hv < 0):
        raise ValueError("h must be nonnegative")
    f = hv - 1.0
    f_pi = orbit_average(f, G)
    if np.max(f_pi) <= tol:
        env = EVariable(G.grid, np.maximum(1.0 + f - f_pi, 0.0), form="symmetry",
                        params={"c": 1.0, "group_order": G.order})
        return Envelope(f_pi, "e-variable", env)
    return Envelope(f_pi, "violated", None)


def invariance_constraints(G: FiniteGroupAction, generators=None, separating=None) -> Hypothesis:
    """Constraints ``sigma^* f - f`` and their negatives for ``sigma`` in ``generators``, ``f`` in ``separating``.

    ``generators`` defaults to the group's own generators and must generate
    the whole group; ``separating`` defaults to the point indicators. No
    duplicate or zero rows are removed.
    """
    n = len(G.grid)
    gens = G.generator_perms() if generators is None else [_as_perm(g, n) for g in generators]
    if not gens:
        raise GroupError("no generators given")
    reached = {p.tobytes() for p in _closure(gens, n)}
    for k, e in enumerate(G.elements):
        if e.tobytes() not in reached:
            raise GroupError(f"generators miss group element {k}: {e.tolist()}")
    F = np.eye(n) if separating is None else np.atleast_2d(np.asarray(separating, dtype=float))
    if F.shape[1] != n or F.shape[0] == 0:
        raise ValueError("separating set must be a nonempty list of grid vectors")
    out = []
    for gi, p in enumerate(gens):
        for fi, f in enumerate(F):
            diff = f[p] - f
            out.append(ConstraintFunction(diff, params={"generator": gi, "feature": fi, "sign": 1}))
            out.append(ConstraintFunction(-diff, params={"generator": gi, "feature": fi, "sign": -1}))
    return Hypothesis(G.grid, tuple(out))
