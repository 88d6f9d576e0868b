"""Beneficial/neutral evolution of a 3-sparse target in 100 dimensions."""
# %%
from evolvolin import ProblemParams, UniformBox, make_smooth
from evolvolin.cli import make_target, load_config
from evolvolin.framework import RunConfig, run_evolution

# %% [markdown]
# The neighbourhood size m matters a lot: new values come from U[-B, B] with
# B = 10uk/delta = 60, so small neighbourhoods often contain nothing within
# the tolerance.  m = 50000 converges reliably.

# %%
n, k = 100, 3
h = make_smooth(UniformBox(0.5), 0.5, n)
p = ProblemParams(n, k, 0.5, 1.0, 0.05, 0.5, h.g_bound)
cp = load_config(None, {})
for m in (200, 50_000):
    for trial in range(3):
        f = make_target(cp, n, k, 0.5, 1.0, trial)
        cfg = RunConfig(p, h, f, m=m, s=2000, t=1e-4, max_generations=5000, cap_k=30,
                        trial=trial)
        tr = run_evolution(cfg)
        print(f"m={m:6d} trial {trial}: {tr.status:8s} after {tr.generations:3d} generations, "
              f"loss {tr.final_loss:.4f}, support {sorted(i + 1 for i in tr.final.support)}")

# %%
print(tr.to_csv()[:400])
