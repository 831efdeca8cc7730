"""
Checking the value function's shape
===================================

Run the five structural checks on a freshly solved instance.  On the raw
truncated model the value checks trip on the top row v1 = N, where escaping
probability is folded back; solving on a larger cap and reading the same
rows makes every check pass.
"""

# %%
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from aoiretx import Params, TruncatedSpace, discounted_vi, rvia, run_all_checks

params = Params(0.5, 0.3, 0.9)
N, alpha = 50, 0.95

V = discounted_vi(TruncatedSpace(N), params, alpha)
pol = rvia(TruncatedSpace(N), params).policy
for rep in run_all_checks(V, pol, params):
    print(rep.summary())

# %%
# Same rows, values solved with 60 spare rows above them.
V_pad = discounted_vi(TruncatedSpace(N + 60), params, alpha).restrict(N)
for rep in run_all_checks(V_pad, pol, params):
    print(rep.summary())

# %%
# The kink: successive increments along v2 = 1 drop sharply at the last step.
inc = [V[(k + 1, 1, 1)] - V[(k, 1, 1)] for k in range(1, N)]
inc_pad = [V_pad[(k + 1, 1, 1)] - V_pad[(k, 1, 1)] for k in range(1, N)]

fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot(range(1, N), inc, label=f"solved on N={N}")
ax.plot(range(1, N), inc_pad, "--", label=f"solved on N={N + 60}")
ax.set_xlabel("v1")
ax.set_ylabel("V(v1+1,1,1) - V(v1,1,1)")
ax.legend()
os.makedirs("out", exist_ok=True)
fig.savefig("out/cap_row_kink.png", dpi=120, bbox_inches="tight")
