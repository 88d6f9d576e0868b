"""Sampleable input distributions with exact second moments.

Two families are built here:

* smooth distributions ``x = x_base + eta`` where ``eta`` is uniform on
  ``[-sqrt(3) delta, sqrt(3) delta]^n``, so each coordinate gains variance
  ``delta^2``;
* incoherent distributions ``x = A z`` with ``z`` uniform on
  ``[-sqrt(3), sqrt(3)]^n`` and ``A`` the symmetric square root of an
  equicorrelated or banded covariance.

Every handle carries its analytic :class:`CovarianceModel` and a support
radius ``g_bound`` that bounds ``||x||_2`` for every emitted sample.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .core_model import CovarianceModel

SQRT3 = np.sqrt(3.0)
# absorbs rounding in the triangle-inequality radius
_RADIUS_PAD = 1.0 + 1e-9

Seed = Union[int, Sequence[int]]


class NicenessError(ValueError):
    pass


def make_rng(seed: Seed) -> np.random.Generator:
    """Generator for an integer seed or a tuple of integers (stream key)."""
    return np.random.default_rng(np.random.SeedSequence(seed))


# -- base distributions -------------------------------------------------------

@dataclass(frozen=True)
class PointMass:
    """All mass at the origin."""

    def covariance(self, n: int) -> np.ndarray:
        return np.zeros((n, n))

    def radius(self, n: int) -> float:
        return 0.0

    def draw(self, rng: np.random.Generator, s: int, n: int) -> np.ndarray:
        return np.zeros((s, n))


@dataclass(frozen=True)
class UniformBox:
    """Independent coordinates, uniform with the given per-coordinate variance."""

    variance: float

    @property
    def half_width(self) -> float:
        return float(np.sqrt(3.0 * self.variance))

    def covariance(self, n: int) -> np.ndarray:
        return self.variance * np.eye(n)

    def radius(self, n: int) -> float:
        return self.half_width * np.sqrt(n)

    def draw(self, rng, s, n):
        a = self.half_width
        return rng.uniform(-a, a, size=(s, n))


@dataclass(frozen=True)
class Rademacher:
    """Independent coordinates equal to ``+-scale`` with probability 1/2."""

    scale: float

    def covariance(self, n):
        return self.scale ** 2 * np.eye(n)

    def radius(self, n):
        return self.scale * np.sqrt(n)

    def draw(self, rng, s, n):
        return self.scale * (2.0 * rng.integers(0, 2, size=(s, n)) - 1.0)


@dataclass(frozen=True, eq=False)
class LowRankUniform:
    """Correlated base ``x = M z`` with ``z`` uniform on ``[-sqrt(3), sqrt(3)]^r``."""

    mixing: np.ndarray

    def _check(self, n):
        if self.mixing.shape[0] != n:
            raise ValueError(f"mixing matrix has {self.mixing.shape[0]} rows, need {n}")

    def covariance(self, n):
        self._check(n)
        return self.mixing @ self.mixing.T

    def radius(self, n):
        self._check(n)
        r = self.mixing.shape[1]
        return float(np.linalg.norm(self.mixing, 2) * SQRT3 * np.sqrt(r))

    def draw(self, rng, s, n):
        self._check(n)
        z = rng.uniform(-SQRT3, SQRT3, size=(s, self.mixing.shape[1]))
        return z @ self.mixing.T

    @classmethod
    def random(cls, n: int, rank: int, variance: float, rng: np.random.Generator):
        """Random mixing matrix whose rows all have second moment ``variance``."""
        m = rng.standard_normal((n, rank))
        m *= np.sqrt(variance) / np.linalg.norm(m, axis=1, keepdims=True)
        return cls(m)


BaseSpec = Union[PointMass, UniformBox, Rademacher, LowRankUniform]


# -- handles ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DistributionHandle:
    kind: str
    dimension: int
    base_spec: BaseSpec | None
    delta: float
    g_bound: float
    covariance: CovarianceModel = field(repr=False)
    mu: float | None = None
    structure: str | None = None
    rho: float = 0.0
    factor: np.ndarray | None = field(default=None, repr=False)
    scale: float = 1.0

    def draw(self, rng: np.random.Generator, s: int) -> np.ndarray:
        n = self.dimension
        if self.kind == "smooth":
            a = SQRT3 * self.delta
            return self.base_spec.draw(rng, s, n) + rng.uniform(-a, a, size=(s, n))
        z = rng.uniform(-SQRT3, SQRT3, size=(s, n))
        if self.structure == "equicorrelated":
            # symmetric root of (1 - rho) I + rho J is a I + c J
            a = np.sqrt(1.0 - self.rho)
            c = (np.sqrt(1.0 - self.rho + n * self.rho) - a) / n
            return self.scale * (a * z + c * z.sum(axis=1, keepdims=True))
        return z @ self.factor


def make_smooth(base_spec: BaseSpec, delta: float, n: int) -> DistributionHandle:
    """Smooth distribution: base plus independent uniform noise of variance delta^2."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    sigma = base_spec.covariance(n) + delta ** 2 * np.eye(n)
    diag = np.diagonal(sigma)
    if np.any(diag > 1.0 + 1e-12):
        worst = int(np.argmax(diag))
        raise NicenessError(
            f"E[x_{worst + 1}^2] = {diag[worst]:.6g} exceeds 1; rescale the base")
    g = (base_spec.radius(n) + SQRT3 * np.sqrt(n) * delta) * _RADIUS_PAD
    return DistributionHandle("smooth", n, base_spec, float(delta), float(g),
                              CovarianceModel(sigma))


def _banded(n: int, rho: float) -> np.ndarray:
    return np.eye(n) + rho * (np.eye(n, k=1) + np.eye(n, k=-1))


def make_incoherent(mu: float, delta: float, n: int, structure: str = "equicorrelated",
                    rho: float | None = None, variance: float = 1.0) -> DistributionHandle:
    """Bounded distribution with pairwise correlations at most ``rho <= mu``.

    ``structure`` is ``"equicorrelated"`` (all pairs correlated ``rho``) or
    ``"banded"`` (neighbours ``i, i+1`` correlated ``rho``).  ``rho`` defaults
    to ``mu``; every coordinate has variance ``variance``.
    """
    rho = mu if rho is None else rho
    if not 0 <= rho <= mu:
        raise ValueError(f"need 0 <= rho <= mu, got rho={rho}, mu={mu}")
    if not delta ** 2 <= variance <= 1.0:
        raise NicenessError(f"variance {variance} outside [delta^2, 1] = [{delta ** 2}, 1]")
    if structure == "equicorrelated":
        corr = (1.0 - rho) * np.eye(n) + rho * np.ones((n, n))
    elif structure == "banded":
        corr = _banded(n, rho)
    else:
        raise ValueError(f"unknown structure {structure!r}")
    evals, evecs = np.linalg.eigh(corr)
    if evals[0] <= 1e-12:
        raise ValueError(f"{structure} correlation with rho={rho} is not positive definite")
    scale = float(np.sqrt(variance))
    root = scale * (evecs * np.sqrt(evals)) @ evecs.T
    root = (root + root.T) / 2.0
    g = float(np.sqrt(evals[-1])) * scale * SQRT3 * np.sqrt(n) * _RADIUS_PAD
    return DistributionHandle("incoherent", n, None, float(delta), g,
                              CovarianceModel(variance * corr), mu=float(mu),
                              structure=structure, rho=float(rho),
                              factor=root if structure == "banded" else None,
                              scale=scale)


# -- samples ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampleBatch:
    matrix: np.ndarray = field(repr=False)
    seed: Seed | None = None

    @property
    def count(self) -> int:
        return self.matrix.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(self.matrix.shape[1])])
        for row in self.matrix:
            writer.writerow([format(v, ".17g") for v in row])
        return buf.getvalue()


def sample(handle: DistributionHandle, count: int, seed: Seed) -> SampleBatch:
    """``count`` i.i.d. draws; identical (handle, count, seed) gives identical bytes."""
    if count < 1:
        raise ValueError("count must be >= 1")
    x = handle.draw(make_rng(seed), count)
    norms = np.einsum("ij,ij->i", x, x)
    if np.any(norms > handle.g_bound ** 2):
        raise AssertionError("sample escaped the support bound")
    x.setflags(write=False)
    return SampleBatch(x, seed)


@dataclass(frozen=True)
class NicenessReport:
    mean_deviation: float
    second_moment_min: float
    second_moment_max: float
    max_row_norm: float
    coherence: float | None
    mean_ok: bool
    variance_ok: bool
    support_ok: bool
    coherence_ok: bool | None

    @property
    def passed(self) -> bool:
        return all(x is not False for x in (self.mean_ok, self.variance_ok,
                                           self.support_ok, self.coherence_ok))


def check_niceness(handle: DistributionHandle, batch: SampleBatch,
                   tol: float | None = None) -> NicenessReport:
    """Empirical check of the zero-mean, second-moment, support and coherence items.

    Statistical items use ``tol`` (default ``6 / sqrt(s)``); the support item
    is exact.
    """
    x = batch.matrix
    s = x.shape[0]
    tol = 6.0 / np.sqrt(s) if tol is None else tol
    mean_dev = float(np.abs(x.mean(axis=0)).max())
    second = (x * x).mean(axis=0)
    row_norm = float(np.sqrt(np.einsum("ij,ij->i", x, x).max()))
    coh = coh_ok = None
    if handle.kind == "incoherent":
        c = np.corrcoef(x, rowvar=False)
        coh = float(np.abs(c[~np.eye(c.shape[0], dtype=bool)]).max()) if c.ndim == 2 else 0.0
        coh_ok = bool(coh <= handle.mu + tol)
    return NicenessReport(
        mean_dev, float(second.min()), float(second.max()), row_norm, coh,
        mean_ok=bool(mean_dev <= tol),
        variance_ok=bool(second.min() >= handle.delta ** 2 - tol and second.max() <= 1.0 + tol),
        support_ok=bool(row_norm <= handle.g_bound),
        coherence_ok=coh_ok,
    )
