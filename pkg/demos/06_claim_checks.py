"""Per-step guarantees checked against the exact loss on random instances."""
# %%
import numpy as np

from evolvolin.oracles import SUITES, run_claim_suite

# %% [markdown]
# Each suite draws random instances that satisfy a step's precondition and
# compares the best achievable decrease over the witness interval with the
# promised decrease.  Doubling the promise (strictness 2) must break some.

# %%
for claim in SUITES:
    reps = run_claim_suite(claim, 100, seed=0)
    margins = np.array([r.margin for r in reps])
    bad = sum(r.passed is False for r in run_claim_suite(claim, 100, seed=0, strictness=2.0))
    print(f"{claim:11s} pass {sum(r.passed is True for r in reps):3d}/100, "
          f"min margin {margins.min():.3g}, failures when doubled: {bad}")

# %%
rep = run_claim_suite("cantaloupe", 1, seed=7)[0]
print(rep.witness, rep.checks, rep.notes)
