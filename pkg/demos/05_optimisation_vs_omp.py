"""Selection by optimisation recovers the same support as greedy OMP."""
# %%
from evolvolin import ProblemParams, make_incoherent
from evolvolin.cli import load_config, make_target
from evolvolin.framework import RunConfig, run_evolution
from evolvolin.oracles import omp_reference

# %%
n, k = 100, 4
h = make_incoherent(1 / (2 * k), 1.0, n, rho=1 / (2 * k))
p = ProblemParams(n, k, 0.5, 1.0, 0.05, 1.0, h.g_bound, mu=1 / (2 * k))
cp = load_config(None, {})
for trial in range(3):
    f = make_target(cp, n, k, 0.5, 1.0, trial)
    tr = run_evolution(RunConfig(p, h, f, algorithm="opt", m=50_000, s=2000, t=1e-4,
                                 max_generations=5000, lam=0.02, trial=trial))
    omp = omp_reference(f, h.covariance, k)
    print(f"trial {trial}: evolved {sorted(tr.final.support)} in {tr.generations} generations,"
          f" omp {sorted(omp.order)}, pure {tr.final.support <= f.support}")
