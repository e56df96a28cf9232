"""Why block minima of ask quotes see jumps that block averages smear.

A jump in the middle of a block splits into two smaller steps of adjacent
block averages of mid quotes. The minima of the ask quotes move by the full
jump, because one-sided noise only pushes quotes up.
"""

import numpy as np

from lomn import NoiseSpec, SimConfig, apply_noise, inject_jump, simulate_path
from lomn.experiments import pulverization_study

n, nh, size = 23_400, 30, 0.01
path = simulate_path(SimConfig(n=n, seed=1))
jump_time = (390 * nh + nh / 2) / n
obs = apply_noise(inject_jump(path, jump_time, size), NoiseSpec("gaussian", 0.0001), seed=1)

starts = np.arange(0, n + 1, nh)
avg = np.add.reduceat(obs.mid, starts) / np.diff(np.append(starts, n + 1))
ask = np.where(obs.ask_mask, obs.ask, np.inf)
mins = np.minimum.reduceat(ask, starts)

k = 390
print("block   mid average    ask minimum")
for j in range(k - 2, k + 3):
    print(f"{j:5d}   {avg[j]: .6f}     {mins[j]: .6f}")
print(f"largest average step {np.max(np.abs(np.diff(avg))):.5f}, "
      f"largest minimum step {np.max(np.abs(np.diff(mins[np.isfinite(mins)]))):.5f}, jump {size}")

avg_ratio, min_ratio = pulverization_study(200)
print(f"over 200 sessions: average step / jump {avg_ratio.mean():.3f}, "
      f"minimum step / jump {min_ratio.mean():.3f}")
