"""Randomised mutators over sparse coefficient vectors.

A neighbourhood is kept as parallel move arrays rather than a list of
vectors: each member differs from the origin by a scaling or by changes to
at most two coordinates, which lets selection score ``m`` members without
materialising them.  :meth:`Neighborhood.member` builds any one on demand.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .core_model import SparseVector


class Move(IntEnum):
    IDENTICAL = 0
    SCALING = 1
    ADJUSTING = 2
    SWAPPING = 3
    ADDING = 4


@dataclass(frozen=True, eq=False)
class Neighborhood:
    """Multiset of mutations of ``origin``.

    For member ``j``: ``kinds[j]`` is the move; ``gamma[j]`` the scaling
    factor; ``index[j]`` the coordinate that is adjusted or added (``-1`` for
    a no-op); ``value[j]`` its new coefficient; ``removed[j]`` the coordinate
    zeroed by a swap.
    """

    origin: SparseVector
    kinds: np.ndarray = field(repr=False)
    index: np.ndarray = field(repr=False)
    value: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    removed: np.ndarray = field(repr=False)
    kind_tag: str = "mixed"

    def __len__(self) -> int:
        return int(self.kinds.size)

    def member(self, j: int) -> SparseVector:
        w = self.origin
        kind = Move(int(self.kinds[j]))
        if kind == Move.SCALING:
            return w * self.gamma[j]
        entries = w.to_mapping()
        if kind == Move.SWAPPING:
            del entries[int(self.removed[j])]
        if kind in (Move.ADJUSTING, Move.SWAPPING, Move.ADDING) and self.index[j] >= 0:
            entries[int(self.index[j])] = float(self.value[j])
        return SparseVector.from_mapping(entries, w.dimension)

    @property
    def members(self) -> list[SparseVector]:
        return [self.member(j) for j in range(len(self))]


@dataclass(frozen=True)
class MutationProposal:
    result: SparseVector
    move: Move
    parameters: dict


def _outside_support(support: np.ndarray, n: int, size: int, rng) -> np.ndarray:
    """Uniform draws from ``[n] \\ support`` by rejection."""
    if support.size >= n:
        return np.full(size, -1, dtype=np.int64)
    out = rng.integers(0, n, size=size)
    bad = np.isin(out, support)
    while bad.any():
        out[bad] = rng.integers(0, n, size=int(bad.sum()))
        bad = np.isin(out, support)
    return out


def _empty(m: int):
    return (np.full(m, Move.IDENTICAL, dtype=np.int8), np.full(m, -1, dtype=np.int64),
            np.zeros(m), np.ones(m), np.full(m, -1, dtype=np.int64))


def _fill_scaling(sel, gamma, rng):
    gamma[sel] = rng.uniform(-1.0, 1.0, size=int(sel.sum()))


def _fill_adjusting(sel, w, index, value, bound, rng):
    cnt = int(sel.sum())
    if w.sparsity:
        index[sel] = w.indices[rng.integers(0, w.sparsity, size=cnt)]
    value[sel] = rng.uniform(-bound, bound, size=cnt)


def bn_neighborhood(w: SparseVector, caps: tuple[float, float], n: int, m: int,
                    rng: np.random.Generator) -> Neighborhood:
    """``m`` independent draws of the scaling / adjusting / swap-or-add mutator.

    Each draw picks one of three branches with probability 1/3.  The third
    branch swaps when ``w`` already has ``cap_k`` nonzeros and adds otherwise.
    With empty support, scaling and adjusting leave ``w`` unchanged.
    """
    if m < 1:
        raise ValueError("neighbourhood size m must be >= 1")
    cap_k, bound = caps
    kinds, index, value, gamma, removed = _empty(m)
    branch = rng.integers(0, 3, size=m)
    third = branch == 2
    kinds[branch == 0] = Move.SCALING
    kinds[branch == 1] = Move.ADJUSTING
    _fill_scaling(branch == 0, gamma, rng)
    _fill_adjusting(branch == 1, w, index, value, bound, rng)
    cnt = int(third.sum())
    if w.sparsity >= cap_k:
        kinds[third] = Move.SWAPPING
        removed[third] = w.indices[rng.integers(0, w.sparsity, size=cnt)]
    else:
        kinds[third] = Move.ADDING
    index[third] = _outside_support(w.indices, n, cnt, rng)
    value[third] = rng.uniform(-bound, bound, size=cnt)
    if w.sparsity >= cap_k and w.sparsity >= n:
        # nothing to swap in: the draw leaves w unchanged
        kinds[third] = Move.IDENTICAL
    return Neighborhood(w, kinds, index, value, gamma, removed, "mixed")


def bn_mutate_one(w: SparseVector, caps: tuple[float, float], n: int,
                  rng: np.random.Generator) -> MutationProposal:
    neigh = bn_neighborhood(w, caps, n, 1, rng)
    kind = Move(int(neigh.kinds[0]))
    params = {"gamma": float(neigh.gamma[0])} if kind == Move.SCALING else {
        "index": int(neigh.index[0]), "value": float(neigh.value[0])}
    if kind == Move.SWAPPING:
        params["removed"] = int(neigh.removed[0])
    return MutationProposal(neigh.member(0), kind, params)


def opt_neighborhood(w: SparseVector, k: int, b: float, n: int, m: int, lam: float,
                     rng: np.random.Generator) -> Neighborhood:
    """Gated mutator for optimisation-based selection.

    One coin with bias ``lam`` decides the whole neighbourhood: either all
    ``m`` draws add a fresh coordinate (tag ``"adding"``; no-ops once ``w``
    has ``k`` nonzeros) or every draw is independently identical (1/2),
    scaling (1/4) or adjusting (1/4), tag ``"non-adding"``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if m < 1:
        raise ValueError("neighbourhood size m must be >= 1")
    kinds, index, value, gamma, removed = _empty(m)
    if rng.random() < lam:
        kinds[:] = Move.ADDING
        if w.sparsity < k:
            index[:] = _outside_support(w.indices, n, m, rng)
            value[:] = rng.uniform(-b, b, size=m)
        return Neighborhood(w, kinds, index, value, gamma, removed, "adding")
    u = rng.random(size=m)
    scal = (u >= 0.5) & (u < 0.75)
    adj = u >= 0.75
    kinds[scal] = Move.SCALING
    kinds[adj] = Move.ADJUSTING
    _fill_scaling(scal, gamma, rng)
    _fill_adjusting(adj, w, index, value, b, rng)
    return Neighborhood(w, kinds, index, value, gamma, removed, "non-adding")
