"""Sparse linear functions and their geometry under a second-moment matrix.

A linear function ``x -> w . x`` is stored as a :class:`SparseVector`.  All
inner products are taken with respect to an input distribution, through its
exact second-moment matrix ``sigma[i, j] = E[x_i x_j]``::

    <v, w> = E[(v . x)(w . x)] = v^T sigma w

Indices are 0-based in the Python API; CSV and report output is 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.linalg

COND_LIMIT = 1e12


class DimensionMismatchError(ValueError):
    pass


class DegenerateSubsetError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class ProblemParams:
    """Parameters of the target class and of the accuracy goal.

    ``delta`` is the smoothness / variance floor and ``g_bound`` the support
    radius of the input distribution.  ``mu`` is only needed for the
    incoherent (optimisation-selection) setting.
    """

    n: int
    k: int
    l: float
    u: float
    epsilon: float
    delta: float
    g_bound: float
    mu: float | None = None

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not (0 <= self.l <= self.u and self.u > 0):
            raise ValueError(f"need 0 <= l <= u and u > 0, got l={self.l}, u={self.u}")
        if self.epsilon <= 0 or self.delta <= 0 or self.g_bound <= 0:
            raise ValueError("epsilon, delta and g_bound must be positive")
        if self.mu is not None and not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Immutable coefficient vector with an explicit nonzero support.

    ``indices`` is strictly increasing and ``values`` holds no zeros, so the
    support NZ(w) is exactly ``set(indices)``.
    """

    dimension: int
    indices: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        val = np.asarray(self.values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values must have the same length")
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        if idx.size and (idx[0] < 0 or idx[-1] >= self.dimension):
            raise IndexError(f"index out of range for dimension {self.dimension}")
        if np.any(np.diff(idx) == 0):
            raise ValueError("duplicate indices")
        keep = val != 0.0
        object.__setattr__(self, "indices", _readonly(idx[keep].copy()))
        object.__setattr__(self, "values", _readonly(val[keep].copy()))

    @classmethod
    def zeros(cls, dimension: int) -> SparseVector:
        return cls(dimension, np.empty(0, np.int64), np.empty(0))

    @classmethod
    def basis(cls, i: int, dimension: int, value: float = 1.0) -> SparseVector:
        return cls(dimension, [i], [value])

    @classmethod
    def from_dense(cls, dense) -> SparseVector:
        dense = np.asarray(dense, dtype=np.float64)
        idx = np.flatnonzero(dense)
        return cls(dense.size, idx, dense[idx])

    @classmethod
    def from_mapping(cls, entries: Mapping[int, float], dimension: int) -> SparseVector:
        keys = list(entries)
        return cls(dimension, keys, [entries[i] for i in keys])

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(i) for i in self.indices)

    @property
    def sparsity(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out

    def to_mapping(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def get(self, i: int) -> float:
        pos = np.searchsorted(self.indices, i)
        if pos < self.indices.size and self.indices[pos] == i:
            return float(self.values[pos])
        return 0.0

    def with_entry(self, i: int, value: float) -> SparseVector:
        """Copy with coordinate ``i`` set to ``value`` (0 removes it)."""
        entries = self.to_mapping()
        entries[int(i)] = float(value)
        return SparseVector.from_mapping(entries, self.dimension)

    def euclidean_norm_sq(self) -> float:
        return float(self.values @ self.values)

    def _check(self, other: SparseVector):
        if other.dimension != self.dimension:
            raise DimensionMismatchError(
                f"dimension {self.dimension} != {other.dimension}")

    def _combine(self, other: SparseVector, sign: float) -> SparseVector:
        self._check(other)
        union = np.union1d(self.indices, other.indices)
        vals = np.zeros(union.size)
        vals[np.searchsorted(union, self.indices)] = self.values
        vals[np.searchsorted(union, other.indices)] += sign * other.values
        return SparseVector(self.dimension, union, vals)

    def __add__(self, other: SparseVector) -> SparseVector:
        return self._combine(other, 1.0)

    def __sub__(self, other: SparseVector) -> SparseVector:
        return self._combine(other, -1.0)

    def __neg__(self) -> SparseVector:
        return SparseVector(self.dimension, self.indices, -self.values)

    def __mul__(self, scalar: float) -> SparseVector:
        return SparseVector(self.dimension, self.indices, float(scalar) * self.values)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (self.dimension == other.dimension
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.dimension, self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self):
        body = ", ".join(f"{i + 1}: {v:.6g}" for i, v in zip(self.indices, self.values))
        return f"SparseVector(n={self.dimension}, {{{body}}})"


@dataclass(frozen=True)
class TargetFunction:
    vector: SparseVector
    params: ProblemParams

    def __post_init__(self):
        p = self.params
        if self.vector.dimension != p.n:
            raise DimensionMismatchError("target dimension differs from params.n")
        if self.vector.sparsity > p.k:
            raise ValueError(f"target has {self.vector.sparsity} > k={p.k} nonzeros")
        mags = np.abs(self.vector.values)
        if np.any(mags < p.l) or np.any(mags > p.u):
            raise ValueError("target coefficients must satisfy l <= |f_i| <= u")


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Exact second-moment matrix of an input distribution."""

    sigma: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.array(self.sigma, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("sigma must be a square matrix")
        # averaging with the transpose makes the matrix bitwise symmetric
        s = (s + s.T) / 2.0
        if s.shape[0] <= 2048:
            lo = np.linalg.eigvalsh(s)[0] if s.size else 0.0
            if lo < -1e-9:
                raise ValueError(f"sigma is not positive semidefinite (min eig {lo:.3g})")
        object.__setattr__(self, "sigma", _readonly(s))

    @classmethod
    def identity(cls, n: int) -> CovarianceModel:
        return cls(np.eye(n))

    @property
    def dimension(self) -> int:
        return self.sigma.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.sigma)

    def basis_norms(self) -> np.ndarray:
        """``||e^i||`` for every coordinate."""
        return np.sqrt(self.diagonal)

    def correlation(self) -> np.ndarray:
        d = self.basis_norms()
        return self.sigma / np.outer(d, d)

    def coherence(self) -> float:
        n = self.dimension
        if n < 2:
            return 0.0
        c = self.correlation()
        return float(np.max(c[~np.eye(n, dtype=bool)]))

    def sigma_times(self, v: SparseVector) -> np.ndarray:
        """Dense ``sigma @ v``, i.e. ``<e^i, v>`` for every i."""
        return self.sigma[:, v.indices] @ v.values


def _check_dims(cov: CovarianceModel, *vectors: SparseVector):
    for v in vectors:
        if v.dimension != cov.dimension:
            raise DimensionMismatchError(
                f"vector dimension {v.dimension} != covariance dimension {cov.dimension}")


def inner_product(v: SparseVector, w: SparseVector, cov: CovarianceModel) -> float:
    """``E[(v . x)(w . x)]`` computed exactly from the second moments.

    The sum runs over the union of both supports and is symmetrised
    termwise, so swapping ``v`` and ``w`` gives a bitwise identical result.
    """
    _check_dims(cov, v, w)
    union = np.union1d(v.indices, w.indices)
    if union.size == 0:
        return 0.0
    a = np.zeros(union.size)
    b = np.zeros(union.size)
    a[np.searchsorted(union, v.indices)] = v.values
    b[np.searchsorted(union, w.indices)] = w.values
    terms = np.outer(a, b) * cov.sigma[np.ix_(union, union)]
    return float((terms + terms.T).sum() / 2.0)


def norm(v: SparseVector, cov: CovarianceModel) -> float:
    return float(np.sqrt(max(inner_product(v, v, cov), 0.0)))


def expected_loss(f: SparseVector, w: SparseVector, cov: CovarianceModel) -> float:
    """Squared loss ``E[(f . x - w . x)^2] = ||f - w||^2``."""
    _check_dims(cov, f, w)
    return max(inner_product(f - w, f - w, cov), 0.0)


@dataclass(frozen=True)
class ProjectionResult:
    projection: SparseVector
    residual_norm_sq: float
    inner_residual: SparseVector | None = None


def solve_normal_equations(cov: CovarianceModel, subset: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``sigma[S, S] v = rhs`` with a Cholesky factorisation."""
    block = cov.sigma[np.ix_(subset, subset)]
    try:
        factor = scipy.linalg.cho_factor(block, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSubsetError("sigma[S, S] is not positive definite") from exc
    anorm = np.abs(block).sum(axis=0).max()
    rcond, info = scipy.linalg.lapack.dpocon(factor[0], anorm, uplo="L" if factor[1] else "U")
    if info != 0 or rcond * COND_LIMIT < 1.0:
        raise DegenerateSubsetError(f"sigma[S, S] is ill-conditioned (rcond={rcond:.3g})")
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def best_projection(f: SparseVector, subset: Iterable[int], cov: CovarianceModel,
                    reference: SparseVector | None = None) -> ProjectionResult:
    """Best approximation ``f^S`` of ``f`` by vectors supported on ``subset``.

    Solves ``sigma[S, S] v_S = (sigma f)_S``.  With a ``reference`` w
    (supported on S) the in-span residual ``f^S - w`` is returned as well.
    """
    _check_dims(cov, f)
    subset = np.unique(np.fromiter(subset, dtype=np.int64))
    if subset.size and (subset[0] < 0 or subset[-1] >= cov.dimension):
        raise IndexError("subset index out of range")
    if subset.size == 0:
        proj = SparseVector.zeros(f.dimension)
    else:
        rhs = cov.sigma[np.ix_(subset, f.indices)] @ f.values
        proj = SparseVector(f.dimension, subset, solve_normal_equations(cov, subset, rhs))
    inner = None
    if reference is not None:
        _check_dims(cov, reference)
        inner = proj - reference
    return ProjectionResult(proj, expected_loss(f, proj, cov), inner)


@dataclass(frozen=True)
class Lemma1Report:
    empty_support: bool
    max_coef_sq: float
    max_bound: float
    min_coef_sq: float
    min_bound: float

    @property
    def max_slack(self) -> float:
        return self.max_bound - self.max_coef_sq

    @property
    def min_slack(self) -> float:
        return self.min_bound - self.min_coef_sq

    def holds(self, tol: float = 1e-9) -> tuple[bool, bool]:
        return self.max_slack >= -tol, self.min_slack >= -tol


def lemma1_check(w: SparseVector, cov: CovarianceModel, delta: float) -> Lemma1Report:
    """Coefficient bounds for Delta-smooth distributions.

    Part 1: every ``w_i^2 <= <w, w> / delta^2``.
    Part 2: the smallest nonzero ``w_i^2 <= <w, w> / (|NZ(w)| delta^2)``.
    """
    _check_dims(cov, w)
    if w.sparsity == 0:
        return Lemma1Report(True, 0.0, 0.0, 0.0, 0.0)
    ww = inner_product(w, w, cov)
    sq = w.values ** 2
    return Lemma1Report(False, float(sq.max()), ww / delta ** 2,
                        float(sq.min()), ww / (w.sparsity * delta ** 2))
