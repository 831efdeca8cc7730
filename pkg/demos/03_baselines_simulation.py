"""
Optimal versus simple rules, exactly and by simulation
======================================================

Exact long-run age of each policy from its stationary distribution, next to
a seeded slot-level simulation with a 99% batch-means interval.
"""

# %%
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from aoiretx import (
    ALWAYS_PREEMPT,
    NEVER_PREEMPT,
    Params,
    THRESHOLD,
    TruncatedSpace,
    build_kernel,
    evaluate_policy_exact,
    extend_policy,
    make_baseline,
    rvia,
    simulate,
)

space = TruncatedSpace(200)
q2s = np.round(np.linspace(0.35, 1.0, 8), 3)
curves = {"optimal": [], "always_preempt": [], "never_preempt": [], "threshold": []}

for q2 in q2s:
    params = Params(0.5, 0.3, q2)
    K = build_kernel(space, params)
    res = rvia(space, params, kernel=K)
    rules = {
        "optimal": extend_policy(res.policy),
        "always_preempt": make_baseline(ALWAYS_PREEMPT),
        "never_preempt": make_baseline(NEVER_PREEMPT),
        "threshold": make_baseline(THRESHOLD(q2 / (q2 - 0.3))),
    }
    line = [f"q2={q2:.3f}"]
    for name, rule in rules.items():
        exact = evaluate_policy_exact(space, params, rule.on(space), kernel=K).gain
        sim = simulate(rule, params, 200_000, seed=1)
        curves[name].append(exact)
        line.append(f"{name} {exact:.3f} (sim {sim.time_average_age:.3f} ± {sim.confidence_half_width_99:.3f})")
    print("  ".join(line))

# %%
fig, ax = plt.subplots(figsize=(6, 4))
for name, ys in curves.items():
    ax.plot(q2s, ys, marker="o", label=name)
ax.set_xlabel("retransmission success q2 (q1 = 0.3, p = 0.5)")
ax.set_ylabel("long-run average age")
ax.legend()
os.makedirs("out", exist_ok=True)
fig.savefig("out/baselines.png", dpi=120, bbox_inches="tight")
