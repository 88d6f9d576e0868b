"""Command-line experiment runner.

Experiments are described by an INI file with sections ``[problem]``,
``[distribution]``, ``[algorithm]``, ``[run]`` and ``[claims]``; any key can
be overridden on the command line as ``--key=value``.  Every CSV written
starts with ``#`` comment lines echoing the resolved configuration.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .core_model import ProblemParams, SparseVector
from .distributions import (
    LowRankUniform,
    sample,
    PointMass,
    Rademacher,
    UniformBox,
    make_incoherent,
    make_rng,
    make_smooth,
)
from .framework import (
    STREAM_SAMPLE,
    STREAM_TARGET,
    ConfigError,
    EvolutionTrace,
    RunConfig,
    fmt,
    run_evolution,
    support_scores,
    theory_params_bn,
    theory_params_opt,
    FEASIBLE_WORK,
)
from .oracles import SUITES, GeneratorStarvation, omp_reference, run_claim_suite

STREAM_BASE = 4
SEED_ENV = "EVOLVOLIN_SEED"

DEFAULTS = {
    "problem": {"n": "100", "k": "3", "l": "0.5", "u": "1.0", "epsilon": "0.05",
                "delta": "0.5", "mu": "", "target": "random"},
    "distribution": {"kind": "smooth", "base": "uniform", "base_variance": "0.5",
                     "base_rank": "2", "structure": "equicorrelated", "rho": "",
                     "variance": "1.0"},
    "algorithm": {"algorithm": "bn", "params_mode": "practical", "m": "200", "s": "2000",
                  "t": "1e-4", "max_generations": "5000", "cap_k": "30", "cap_b": "",
                  "lambda": "", "m_scaling": "fixed", "m_reference_n": "100"},
    "run": {"trials": "20", "master_seed": "0", "output_dir": "out", "n_list": "50,100,200"},
    "claims": {"instances": "500", "lemma_instances": "1000", "claim_seed": "0",
               "claim_list": ",".join(SUITES), "inject_bug": "false"},
}
SECTION_OF = {key: sec for sec, keys in DEFAULTS.items() for key in keys}


# -- configuration --------------------------------------------------------------

def load_config(path: str | None, overrides: dict[str, str]) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(DEFAULTS)
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file {path!r} not found")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
    for key, value in overrides.items():
        sec, _, name = key.rpartition(".")
        sec = sec or SECTION_OF.get(name)
        if sec is None:
            raise ConfigError(f"unknown key {key!r}")
        cp[sec][name] = value
    if SEED_ENV in os.environ:
        cp["run"]["master_seed"] = os.environ[SEED_ENV]
    return cp


def echo(cp: configparser.ConfigParser) -> list[str]:
    return [f"{sec}.{key}={cp[sec][key]}" for sec in DEFAULTS for key in sorted(cp[sec])]


def _get(cp, key, conv, optional=False):
    raw = cp[SECTION_OF[key]][key].strip()
    if raw == "" and optional:
        return None
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def build_handle(cp, n: int):
    delta = _get(cp, "delta", float)
    kind = cp["distribution"]["kind"]
    try:
        if kind == "smooth":
            base = cp["distribution"]["base"]
            v = _get(cp, "base_variance", float)
            if base == "point":
                spec = PointMass()
            elif base == "uniform":
                spec = UniformBox(v)
            elif base == "rademacher":
                spec = Rademacher(math.sqrt(v))
            elif base == "lowrank":
                rng = make_rng((_get(cp, "master_seed", int), n, STREAM_BASE))
                spec = LowRankUniform.random(n, _get(cp, "base_rank", int), v, rng)
            else:
                raise ConfigError(f"unknown base {base!r}")
            return make_smooth(spec, delta, n)
        if kind == "incoherent":
            mu = _get(cp, "mu", float, optional=True)
            if mu is None:
                raise ConfigError("incoherent distributions need problem.mu")
            return make_incoherent(mu, delta, n, cp["distribution"]["structure"],
                                   _get(cp, "rho", float, optional=True),
                                   _get(cp, "variance", float))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown distribution kind {kind!r}")


def make_target(cp, n: int, k: int, l: float, u: float, trial: int) -> SparseVector:
    spec = cp["problem"]["target"].strip()
    if spec == "zero":
        return SparseVector.zeros(n)
    if spec == "random":
        rng = make_rng((_get(cp, "master_seed", int), trial, STREAM_TARGET))
        idx = rng.choice(n, k, replace=False)
        vals = rng.uniform(l, u, k) * rng.choice([-1.0, 1.0], k)
        return SparseVector(n, idx, vals)
    try:
        entries = {int(i) - 1: float(v) for i, v in
                   (item.split(":") for item in spec.split(",") if item.strip())}
        return SparseVector.from_mapping(entries, n)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad target {spec!r}; use random, zero or i:v,i:v") from exc


def build_runs(cp, n: int | None = None) -> list[RunConfig]:
    n = n or _get(cp, "n", int)
    k, l, u = _get(cp, "k", int), _get(cp, "l", float), _get(cp, "u", float)
    handle = build_handle(cp, n)
    try:
        problem = ProblemParams(n, k, l, u, _get(cp, "epsilon", float),
                                _get(cp, "delta", float), handle.g_bound,
                                _get(cp, "mu", float, optional=True))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    m = _get(cp, "m", int, optional=True)
    if m is not None and cp["algorithm"]["m_scaling"] == "linear":
        m = max(1, math.ceil(m * n / _get(cp, "m_reference_n", int)))
    elif m is not None and cp["algorithm"]["m_scaling"] != "fixed":
        raise ConfigError("m_scaling must be fixed or linear")
    template = dict(
        algorithm=cp["algorithm"]["algorithm"],
        params_mode=cp["algorithm"]["params_mode"],
        m=m, s=_get(cp, "s", int, optional=True), t=_get(cp, "t", float, optional=True),
        max_generations=_get(cp, "max_generations", int, optional=True),
        cap_k=_get(cp, "cap_k", int, optional=True),
        cap_b=_get(cp, "cap_b", float, optional=True),
        lam=_get(cp, "lambda", float, optional=True),
        master_seed=_get(cp, "master_seed", int),
    )
    trials = _get(cp, "trials", int)
    runs = [RunConfig(problem, handle, make_target(cp, n, k, l, u, i), trial=i, **template)
            for i in range(trials)]
    for r in runs:
        r.resolved()
    return runs


# -- execution ------------------------------------------------------------------

def _timed_run(cfg: RunConfig) -> tuple[EvolutionTrace, float]:
    t0 = time.perf_counter()
    trace = run_evolution(cfg)
    return trace, time.perf_counter() - t0


def execute(runs: list[RunConfig], jobs: int) -> list[tuple[EvolutionTrace, float]]:
    if jobs <= 1 or len(runs) <= 1:
        out = [_timed_run(r) for r in runs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_timed_run, runs))
    return sorted(out, key=lambda x: x[0].trial)


def write_csv(path: Path, header, rows, comments):
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def _support_str(v: SparseVector) -> str:
    return ";".join(str(i + 1) for i in sorted(v.support))


def summary_rows(traces):
    rows = []
    for tr in traces:
        prec, rec = support_scores(tr.final, tr.target)
        rows.append([tr.trial, fmt(tr.final_loss), tr.generations, tr.status,
                     fmt(prec), fmt(rec)])
    return rows


def write_svg(path: Path, traces: list[EvolutionTrace], width=640, height=400):
    """Exact loss against generation, log-scale y, one polyline per trial."""
    pad = 40
    losses = [max(r.loss_exact, 1e-300) for tr in traces for r in tr.records]
    lo, hi = math.log10(min(losses)), math.log10(max(losses))
    hi = hi if hi > lo else lo + 1.0
    gmax = max(max(tr.generations for tr in traces), 1)

    def xy(g, loss):
        x = pad + (width - 2 * pad) * g / gmax
        y = height - pad - (height - 2 * pad) * (math.log10(max(loss, 1e-300)) - lo) / (hi - lo)
        return f"{x:.2f},{y:.2f}"

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="black"/>',
             f'<text x="{pad}" y="{pad - 8}" font-size="12">log10 exact loss '
             f'[{lo:.2f}, {hi:.2f}] vs generation [0, {gmax}]</text>']
    for tr in traces:
        pts = " ".join(xy(r.generation, r.loss_exact) for r in tr.records)
        parts.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1" points="{pts}"/>')
    parts.append("</svg>\n")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts))


def cmd_run(cp, args) -> int:
    runs = build_runs(cp)
    results = execute(runs, args.jobs)
    traces = [tr for tr, _ in results]
    out = Path(cp["run"]["output_dir"])
    comments = echo(cp)
    for tr in traces:
        (out / f"trace_trial_{tr.trial:03d}.csv").parent.mkdir(parents=True, exist_ok=True)
        (out / f"trace_trial_{tr.trial:03d}.csv").write_text(tr.to_csv(comments=comments))
    write_csv(out / "summary.csv",
              ["trial", "final_loss", "generations", "status", "support_precision",
               "support_recall"], summary_rows(traces), comments)
    if args.plot:
        write_svg(Path(args.plot), traces)
    if args.export_sample:
        # the batch trial 0 sees at generation 1
        cfg = runs[0].resolved()
        batch = sample(cfg.handle, cfg.s, (cfg.master_seed, 0, STREAM_SAMPLE, 1))
        Path(args.export_sample).write_text(batch.to_csv())
    return 1 if all(tr.status == "bot" for tr in traces) else 0


def cmd_sweep_n(cp, args) -> int:
    n_list = [int(x) for x in cp["run"]["n_list"].split(",") if x.strip()]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("n_list must be strictly increasing")
    rows, all_bot = [], True
    for n in n_list:
        runs = build_runs(cp, n)
        results = execute(runs, args.jobs)
        traces = [tr for tr, _ in results]
        all_bot &= all(tr.status == "bot" for tr in traces)
        wins = [tr.generations for tr in traces if tr.status == "success"]
        median = fmt(float(np.median(wins))) if wins else "nan"
        row = [n, runs[0].resolved().m, len(traces), len(wins), fmt(len(wins) / len(traces)),
               median, runs[0].resolved().s * n]
        if args.timing:
            gens = sum(max(tr.generations, 1) for tr in traces)
            row.append(fmt(sum(sec for _, sec in results) / gens))
        rows.append(row)
    header = ["n", "m", "trials", "successes", "success_rate", "median_generations",
              "sample_values_per_generation"]
    if args.timing:
        header.append("seconds_per_generation")
    write_csv(Path(cp["run"]["output_dir"]) / "sweep.csv", header, rows, echo(cp))
    return 1 if all_bot else 0


def cmd_verify_claims(cp, args) -> int:
    claims = [c.strip() for c in cp["claims"]["claim_list"].split(",") if c.strip()]
    unknown = set(claims) - set(SUITES)
    if unknown:
        raise ConfigError(f"unknown claims {sorted(unknown)}")
    seed = _get(cp, "claim_seed", int)
    strictness = 2.0 if cp["claims"]["inject_bug"].lower() in ("1", "true", "yes") else 1.0
    rows, failures = [], 0
    try:
        for claim in claims:
            count = _get(cp, "lemma_instances" if claim == "lemma1" else "instances", int)
            for rep in run_claim_suite(claim, count, seed, strictness):
                failures += rep.passed is False
                rows.append([claim, rep.instance, fmt(rep.required_decrease),
                             fmt(rep.achieved_decrease), fmt(rep.margin),
                             str(rep.precondition_met).lower(),
                             "na" if rep.passed is None else str(rep.passed).lower()])
    except GeneratorStarvation as exc:
        print(f"generator starvation: {exc}", file=sys.stderr)
        return 3
    write_csv(Path(cp["run"]["output_dir"]) / "claims.csv",
              ["claim", "instance_seed", "required_decrease", "achieved_decrease", "margin",
               "precondition_met", "pass"], rows, echo(cp))
    print(f"{len(rows)} instances, {failures} failures")
    return 1 if failures else 0


def theory_table(cp) -> list[tuple[str, str]]:
    n = _get(cp, "n", int)
    handle = build_handle(cp, n)
    try:
        p = ProblemParams(n, _get(cp, "k", int), _get(cp, "l", float), _get(cp, "u", float),
                          _get(cp, "epsilon", float), _get(cp, "delta", float), handle.g_bound,
                          _get(cp, "mu", float, optional=True))
        tp = (theory_params_bn if cp["algorithm"]["algorithm"] == "bn" else theory_params_opt)(p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    work = float(tp.g) * float(tp.s)
    rows = [("G", fmt(handle.g_bound)), ("K", fmt(tp.cap_k)), ("B", fmt(tp.cap_b)),
            ("W", fmt(tp.cap_w)), ("p", fmt(tp.p)), ("alpha", fmt(tp.alpha)),
            ("g", fmt(tp.g)), ("m", str(tp.m)), ("s", str(tp.s)), ("t", fmt(tp.t)),
            ("tau", fmt(tp.tau)), ("lambda", "nan" if tp.lam is None else fmt(tp.lam)),
            ("g*s", fmt(work)),
            ("feasible", "yes" if work <= FEASIBLE_WORK else
             f"no (g*s exceeds {FEASIBLE_WORK:.0e}; use practical mode)")]
    return rows


def cmd_theory_params(cp, args) -> int:
    rows = theory_table(cp)
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key:<{width}}  {value}")
    return 0


def cmd_omp_compare(cp, args) -> int:
    if cp["algorithm"]["algorithm"] != "opt":
        raise ConfigError("omp-compare needs algorithm = opt")
    runs = build_runs(cp)
    traces = [tr for tr, _ in execute(runs, args.jobs)]
    rows = []
    for cfg, tr in zip(runs, traces):
        omp = omp_reference(tr.target, cfg.handle.covariance, cfg.problem.k)
        evo, ref = tr.final.support, set(omp.order)
        union = evo | ref
        jac = len(evo & ref) / len(union) if union else 1.0
        rows.append([tr.trial, _support_str(tr.final), ";".join(str(i + 1) for i in sorted(ref)),
                     str(evo == ref).lower(), fmt(jac), str(evo <= tr.target.support).lower(),
                     tr.status])
    write_csv(Path(cp["run"]["output_dir"]) / "omp_compare.csv",
              ["trial", "evo_support", "omp_support", "match", "jaccard", "evo_pure", "status"],
              rows, echo(cp))
    return 1 if all(tr.status == "bot" for tr in traces) else 0


COMMANDS = {
    "run": cmd_run,
    "sweep-n": cmd_sweep_n,
    "verify-claims": cmd_verify_claims,
    "theory-params": cmd_theory_params,
    "omp-compare": cmd_omp_compare,
}


def parse_args(argv):
    parser = argparse.ArgumentParser(prog="evolvolin", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", nargs="?", help="INI experiment file")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--plot", metavar="PATH", help="write an SVG loss chart (run only)")
    parser.add_argument("--export-sample", metavar="PATH",
                        help="write the first sample batch of trial 0 as CSV (run only)")
    parser.add_argument("--timing", action="store_true",
                        help="add a wall-clock column to sweep-n output (not reproducible)")
    args, rest = parser.parse_known_args(argv)
    overrides = {}
    for item in rest:
        if not item.startswith("--") or "=" not in item:
            parser.error(f"unrecognised argument {item!r}; use --key=value")
        key, value = item[2:].split("=", 1)
        overrides[key] = value
    return args, overrides


def main(argv=None) -> int:
    args, overrides = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        cp = load_config(args.config, overrides)
        return COMMANDS[args.command](cp, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
