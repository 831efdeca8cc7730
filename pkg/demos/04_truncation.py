"""
How large a cap is large enough
===============================

The gain of the truncated problem settles quickly as the age cap grows; the
brute-force oracle confirms the solver on the smallest caps.
"""

# %%
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from aoiretx import Params, TruncatedSpace, brute_force_optimal, rvia

params = Params(0.5, 0.3, 0.9)

for N in range(1, 5):
    g_oracle, _ = brute_force_optimal(TruncatedSpace(N), params)
    g = rvia(TruncatedSpace(N), params).gain
    print(f"N={N}: oracle {g_oracle:.10f}  rvia {g:.10f}")

# %%
caps = [5, 10, 15, 20, 30, 50, 100, 200]
gains = [rvia(TruncatedSpace(N), params).gain for N in caps]
for N, g in zip(caps, gains):
    print(f"N={N:4d}  gain {g:.10f}  relative gap to N=200 {abs(g - gains[-1]) / gains[-1]:.2e}")

fig, ax = plt.subplots(figsize=(5, 3.5))
ax.semilogx(caps, gains, marker="o")
ax.set_xlabel("age cap N")
ax.set_ylabel("optimal average age")
os.makedirs("out", exist_ok=True)
fig.savefig("out/truncation.png", dpi=120, bbox_inches="tight")
