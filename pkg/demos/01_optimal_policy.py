"""
Where the optimal scheduler retransmits
=======================================

Solve the average-age problem at one operating point and draw the decision
made whenever a fresh packet waits next to an older queued one.
"""

# %%
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from aoiretx import Params, TruncatedSpace, rvia, threshold_summary

params = Params(p=0.5, q1=0.3, q2=0.9)
space = TruncatedSpace(60)
res = rvia(space, params)
print(f"optimal average age {res.gain:.6f} after {res.iterations} sweeps")

# %%
# Decision grid: rows are the user's age v1, columns the queued packet's age v2.
# 0 keeps retransmitting the old packet, 1 drops it for the fresh one.
N = space.N
grid = np.full((N + 1, N + 1), np.nan)
for v1 in range(1, N + 1):
    for v2 in range(1, v1 + 1):
        grid[v1, v2] = int(res.policy((v1, v2, 1)))

for v1 in range(1, 16):
    print(f"{v1:3d} " + "".join(".#"[int(a)] for a in grid[v1, 1:v1 + 1]))

# %%
# Above the line v1 = q2 v2 / (q2 - q1) every retransmit region is a half-line in v1.
rows = threshold_summary(res.policy, params)
print("all retransmit sets closed upward above the line:", all(r.upward_closed for r in rows))

fig, ax = plt.subplots(figsize=(5, 5))
ax.imshow(grid[1:, 1:], origin="lower", extent=(0.5, N + 0.5, 0.5, N + 0.5), cmap="coolwarm")
v2 = np.arange(1, N + 1)
ax.plot(v2, params.q2 * v2 / (params.q2 - params.q1), "k--", lw=1)
ax.set_xlim(0.5, N + 0.5)
ax.set_ylim(0.5, N + 0.5)
ax.set_xlabel("queued packet age v2")
ax.set_ylabel("user age v1")
ax.set_title("blue: retransmit, red: send fresh")
os.makedirs("out", exist_ok=True)
fig.savefig("out/optimal_policy.png", dpi=120, bbox_inches="tight")
