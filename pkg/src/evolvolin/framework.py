"""Selection rules, parameter calculators and the generation loop."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core_model import (
    DimensionMismatchError,
    ProblemParams,
    SparseVector,
    expected_loss,
)
from .distributions import DistributionHandle, SampleBatch, make_rng, sample
from .mutators import Move, Neighborhood, bn_neighborhood, opt_neighborhood

BOT = None
FEASIBLE_WORK = 1e9

# stream purposes for named RNG streams: (master_seed, trial, purpose[, generation])
STREAM_TARGET = 0
STREAM_MUTATION = 1
STREAM_SAMPLE = 2
STREAM_SELECTION = 3


class ConfigError(ValueError):
    pass


# -- theory parameters --------------------------------------------------------

@dataclass(frozen=True)
class TheoryParams:
    cap_k: float
    cap_b: float
    cap_w: float
    p: float
    alpha: float
    g: float
    m: int
    s: int
    t: float
    tau: float
    lam: float | None = None

    @property
    def sparsity_cap(self) -> int:
        return int(math.floor(self.cap_k))


def theory_params_bn(p: ProblemParams) -> TheoryParams:
    """Constants for beneficial/neutral selection over smooth distributions."""
    if p.l <= 0:
        raise ValueError("theory mode needs l > 0; the l = 0 class has no explicit K")
    k, d, eps, G = p.k, p.delta, p.epsilon, p.g_bound
    K = 5184.0 * (k / d) ** 4 * (p.u / p.l) ** 2
    B = 10.0 * p.u * k / d
    prob = min(1.0 / 12.0,
               p.l ** 2 * d ** 3 / (24.0 * K ** 3 * B ** 2),
               d * math.sqrt(eps) / (6.0 * K * B * p.n * k))
    alpha = min(p.l ** 4 * d ** 4 / (192.0 * K ** 2 * B ** 2),
                3.0 * p.l ** 4 * d ** 6 / (64.0 * K ** 4 * B ** 2),
                eps * d ** 2 / (16.0 * k ** 2))
    g = 20.0 * K * G ** 2 * B ** 2 / alpha
    m = math.ceil(math.log(2.0 * g / eps) / prob)
    s = math.ceil(200.0 * g * K * G ** 2 * B ** 2 / alpha ** 2 * math.log(4.0 * m / eps))
    return TheoryParams(K, B, math.sqrt(K * B ** 2), prob, alpha, g, m, s,
                        3.0 * alpha / 5.0, alpha / 5.0)


def theory_params_opt(p: ProblemParams) -> TheoryParams:
    """Constants for optimisation-based selection over 1/(2k)-incoherent distributions."""
    k, eps, G = p.k, p.epsilon, p.g_bound
    if p.mu is not None and p.mu > 1.0 / (2 * k):
        raise ValueError(f"mu={p.mu} exceeds 1/(2k)={1.0 / (2 * k)}")
    B = 10.0 * p.u * k / p.delta
    prob = min(1.0 / 16.0, math.sqrt(eps) / (64.0 * k ** 3 * B),
               math.sqrt((k + 1) * eps) / k ** 2)
    alpha = eps / (192.0 * k ** 4)
    lam = eps * alpha / (80.0 * k * (k + 1) * B ** 2 * G ** 2)
    g = math.ceil(4.0 * (k + 1) ** 2 / (eps * lam)) + (k + 1)
    m = math.ceil(math.log(4.0 * g / eps) / prob)
    s = math.ceil(200.0 * g * k * G ** 2 * B ** 2 / alpha ** 2 * math.log(4.0 * m / eps))
    return TheoryParams(float(k), B, math.sqrt(k * B ** 2), prob, alpha, float(g), m, s,
                        3.0 * alpha / 5.0, alpha / 5.0, lam)


# -- empirical losses -----------------------------------------------------------

def _predict(w: SparseVector, x: np.ndarray) -> np.ndarray:
    return x[:, w.indices] @ w.values


def empirical_loss(w: SparseVector, f: SparseVector, batch: SampleBatch) -> float:
    """Mean squared disagreement of ``w`` and ``f`` on the batch."""
    x = batch.matrix
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if w.dimension != x.shape[1] or f.dimension != x.shape[1]:
        raise DimensionMismatchError("batch width differs from vector dimension")
    r = _predict(f, x) - _predict(w, x)
    return float(r @ r / x.shape[0])


def neighborhood_losses(neigh: Neighborhood, f: SparseVector,
                        batch: SampleBatch) -> tuple[float, np.ndarray]:
    """Empirical loss of the origin and of every member, on one batch.

    Uses the residual ``e = (f - w) . x``: a member changing coordinate j by
    ``d`` scores ``mean((e - d x_j)^2)``, expanded into per-coordinate moments
    so each member costs O(1) (swaps add one O(s) cross moment).
    """
    x = batch.matrix
    s = x.shape[0]
    w = neigh.origin
    y = _predict(w, x)
    e = _predict(f, x) - y
    base = float(e @ e / s)
    out = np.full(len(neigh), base)
    kinds, idx = neigh.kinds, neigh.index

    sc = kinds == Move.SCALING
    if sc.any():
        one_minus = 1.0 - neigh.gamma[sc]
        ey, yy = e @ y / s, y @ y / s
        out[sc] = base + 2.0 * one_minus * ey + one_minus ** 2 * yy

    single = ((kinds == Move.ADJUSTING) | (kinds == Move.ADDING)) & (idx >= 0)
    swap = kinds == Move.SWAPPING
    touched = np.unique(np.concatenate([idx[single | swap], neigh.removed[swap]]))
    if touched.size:
        cols = x[:, touched]
        c = e @ cols / s
        d = np.einsum("ij,ij->j", cols, cols) / s
        dense_w = np.zeros(w.dimension)
        dense_w[w.indices] = w.values
        if single.any():
            pos = np.searchsorted(touched, idx[single])
            step = neigh.value[single] - dense_w[idx[single]]
            out[single] = base - 2.0 * step * c[pos] + step ** 2 * d[pos]
        if swap.any():
            p_in = np.searchsorted(touched, idx[swap])
            p_out = np.searchsorted(touched, neigh.removed[swap])
            v, a = neigh.value[swap], dense_w[neigh.removed[swap]]
            cross = np.empty(v.size)
            for lo in range(0, v.size, 4096):
                sl = slice(lo, lo + 4096)
                cross[sl] = np.einsum("ij,ij->j", cols[:, p_in[sl]], cols[:, p_out[sl]]) / s
            out[swap] = (base + 2.0 * a * c[p_out] - 2.0 * v * c[p_in]
                         + a ** 2 * d[p_out] + v ** 2 * d[p_in] - 2.0 * a * v * cross)
    return base, out


# -- selection ------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionOutcome:
    survivor: SparseVector | None
    event: str
    empirical_losses: np.ndarray = field(repr=False)
    origin_loss: float = float("nan")
    chosen: int = -1

    @property
    def survivor_loss(self) -> float:
        return float(self.empirical_losses[self.chosen]) if self.chosen >= 0 else float("nan")


def bn_eligible(origin_loss: float, losses: np.ndarray, t: float) -> tuple[str, np.ndarray]:
    """Event and eligible member indices for beneficial/neutral selection."""
    bene = np.flatnonzero(losses <= origin_loss - t)
    if bene.size:
        return "beneficial", bene
    neut = np.flatnonzero(np.abs(losses - origin_loss) < t)
    if neut.size:
        return "neutral", neut
    return "failure", neut


def opt_eligible(origin_loss: float, losses: np.ndarray, t: float) -> tuple[str, np.ndarray]:
    """Event and eligible member indices for optimisation-based selection."""
    best = losses.min()
    if best > origin_loss + t:
        return "failure", np.empty(0, dtype=np.int64)
    return "best", np.flatnonzero(losses <= best + t)


def _select(rule, neigh, f, batch, t, rng) -> SelectionOutcome:
    if t <= 0:
        raise ValueError("tolerance t must be positive")
    base, losses = neighborhood_losses(neigh, f, batch)
    event, eligible = rule(base, losses, t)
    if event == "failure":
        return SelectionOutcome(BOT, event, losses, base)
    j = int(eligible[rng.integers(eligible.size)])
    return SelectionOutcome(neigh.member(j), event, losses, base, j)


def bn_select(neigh: Neighborhood, f: SparseVector, batch: SampleBatch, t: float,
              rng: np.random.Generator) -> SelectionOutcome:
    """Uniform pick among beneficial members, else among neutral ones, else BOT."""
    return _select(bn_eligible, neigh, f, batch, t, rng)


def opt_select(neigh: Neighborhood, f: SparseVector, batch: SampleBatch, t: float,
               rng: np.random.Generator) -> SelectionOutcome:
    """Uniform pick among members within ``t`` of the neighbourhood minimum."""
    return _select(opt_eligible, neigh, f, batch, t, rng)


# -- runs -----------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Everything one evolution run needs.

    ``params_mode="practical"`` uses ``m, s, t, max_generations`` (and
    ``cap_k`` / ``lam``) as given; ``"theory"`` derives them from the
    problem, which is only feasible for tiny instances.
    """

    problem: ProblemParams
    handle: DistributionHandle
    target: SparseVector
    algorithm: str = "bn"
    params_mode: str = "practical"
    m: int | None = None
    s: int | None = None
    t: float | None = None
    max_generations: int | None = None
    cap_k: int | None = None
    cap_b: float | None = None
    lam: float | None = None
    initial: SparseVector | None = None
    master_seed: int = 0
    trial: int = 0

    def resolved(self) -> RunConfig:
        """Validated copy with every run parameter filled in."""
        p = self.problem
        if self.algorithm not in ("bn", "opt"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.handle.dimension != p.n or self.target.dimension != p.n:
            raise ConfigError("problem, distribution and target dimensions differ")
        if self.algorithm == "opt":
            if p.mu is None or p.mu > 1.0 / (2 * p.k) + 1e-15:
                raise ConfigError("opt selection needs mu <= 1/(2k)")
            if self.initial is not None and self.initial.sparsity:
                raise ConfigError("opt selection starts from the zero vector")
        if self.params_mode == "theory":
            tp = (theory_params_bn if self.algorithm == "bn" else theory_params_opt)(p)
            if float(tp.m) * float(tp.s) > FEASIBLE_WORK:
                raise ConfigError(
                    f"theory parameters need m*s = {float(tp.m) * float(tp.s):.3g} "
                    "loss evaluations per generation; use practical mode")
            return replace(self, m=tp.m, s=tp.s, t=tp.t,
                           max_generations=math.ceil(tp.g),
                           cap_k=tp.sparsity_cap if self.algorithm == "bn" else p.k,
                           cap_b=tp.cap_b, lam=tp.lam)
        if self.params_mode != "practical":
            raise ConfigError(f"unknown params_mode {self.params_mode!r}")
        missing = [k for k in ("m", "s", "t", "max_generations") if getattr(self, k) is None]
        if self.algorithm == "bn" and self.cap_k is None:
            missing.append("cap_k")
        if self.algorithm == "opt" and self.lam is None:
            missing.append("lambda")
        if missing:
            raise ConfigError(f"practical mode needs {', '.join(missing)}")
        if self.m < 1 or self.s < 1 or self.t <= 0 or self.max_generations < 0:
            raise ConfigError("m, s >= 1, t > 0 and max_generations >= 0 required")
        cap_k = p.k if self.algorithm == "opt" else self.cap_k
        cap_b = self.cap_b if self.cap_b is not None else 10.0 * p.u * p.k / p.delta
        return replace(self, cap_k=cap_k, cap_b=cap_b)


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    loss_exact: float
    loss_empirical: float
    sparsity: int
    support_precision: float
    support_recall: float
    event: str


@dataclass
class EvolutionTrace:
    trial: int
    records: list[GenerationRecord]
    status: str
    final: SparseVector
    target: SparseVector
    master_seed: int
    config_echo: dict = field(default_factory=dict)

    @property
    def generations(self) -> int:
        return self.records[-1].generation

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss_exact

    def to_csv(self, header: bool = True, comments: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in comments:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow(TRACE_COLUMNS)
        for r in self.records:
            writer.writerow([self.trial, r.generation, fmt(r.loss_exact), fmt(r.loss_empirical),
                             r.sparsity, fmt(r.support_precision), fmt(r.support_recall), r.event])
        return buf.getvalue()


TRACE_COLUMNS = ("trial", "generation", "loss_exact", "loss_empirical", "sparsity",
                 "support_precision", "support_recall", "event")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def support_scores(w: SparseVector, f: SparseVector) -> tuple[float, float]:
    hit = len(w.support & f.support)
    precision = hit / w.sparsity if w.sparsity else 1.0
    recall = hit / f.sparsity if f.sparsity else 1.0
    return precision, recall


def run_evolution(config: RunConfig) -> EvolutionTrace:
    """Run one chain of mutation and selection until success, budget or BOT.

    Selection sees only the per-generation sample; the exact loss is
    recorded for instrumentation and for the stopping test.
    """
    cfg = config.resolved()
    p, f, cov = cfg.problem, cfg.target, cfg.handle.covariance
    w = cfg.initial if cfg.initial is not None else SparseVector.zeros(p.n)
    if cfg.algorithm == "bn" and w.sparsity > cfg.cap_k:
        raise ConfigError("initial representation exceeds the sparsity cap")
    mut_rng = make_rng((cfg.master_seed, cfg.trial, STREAM_MUTATION))
    sel_rng = make_rng((cfg.master_seed, cfg.trial, STREAM_SELECTION))

    def record(gen, emp, event):
        prec, rec = support_scores(w, f)
        return GenerationRecord(gen, expected_loss(f, w, cov), emp, w.sparsity, prec, rec, event)

    records = [record(0, float("nan"), "init")]
    status = "budget-exhausted"
    gen = 0
    while True:
        if records[-1].loss_exact <= p.epsilon:
            status = "success"
            break
        if gen >= cfg.max_generations:
            break
        gen += 1
        batch = sample(cfg.handle, cfg.s, (cfg.master_seed, cfg.trial, STREAM_SAMPLE, gen))
        if cfg.algorithm == "bn":
            neigh = bn_neighborhood(w, (cfg.cap_k, cfg.cap_b), p.n, cfg.m, mut_rng)
            out = bn_select(neigh, f, batch, cfg.t, sel_rng)
        else:
            neigh = opt_neighborhood(w, p.k, cfg.cap_b, p.n, cfg.m, cfg.lam, mut_rng)
            out = opt_select(neigh, f, batch, cfg.t, sel_rng)
        if out.survivor is BOT:
            records.append(record(gen, float("nan"), "failure"))
            status = "bot"
            break
        w = out.survivor
        records.append(record(gen, out.survivor_loss, out.event))
    return EvolutionTrace(cfg.trial, records, status, w, f, cfg.master_seed)
