"""
Head-on swap: deadlock without opinions, a random but safe resolution with them
===============================================================================
"""

# %%
# Two airplanes start 10 units apart and each wants the other's start. Every
# quantity the bare safety filter sees is mirror-symmetric, so with no noise
# both airplanes swerve in mirror image and end up facing each other,
# blocked, until the time limit.

from pathlib import Path

import numpy as np

from blockfree.analysis import head_on_scenario, swap_direction
from blockfree.encounter import run_scenario
from blockfree.svg import write_run_svgs

out = Path(__file__).parent / "out"

base = head_on_scenario(noise_std=0.0, opinion_enabled=False, t_max=60.0)
log, m = run_scenario(base)
print("baseline: reached", m.all_reached, "blocking dwell", round(m.max_blocking_dwell, 2))

# %%
# Switch the opinions on and add small heading noise. Attention spikes as the
# bearing freezes, the neutral opinion becomes unstable and both airplanes
# fall to the same side. Which side is decided by the noise.

sides = []
for seed in range(20):
    log, m = run_scenario(head_on_scenario(seed=seed))
    sides.append(swap_direction(log))
    assert m.violation_count == 0
print("opinion runs: ccw", sides.count("ccw"), "cw", sides.count("cw"))

# %%
# One resolution in detail: both opinions share a sign at the moment of
# commitment.

log, m = run_scenario(head_on_scenario(seed=1))
z1, z2 = log.column("z", 1), log.column("z", 2)
k = int(np.argmax(np.abs(z1)))
print(f"t={log.column('t', 1)[k]:.2f}  z1={z1[k]:+.3f}  z2={z2[k]:+.3f}  min sep {m.min_separation:.3f}")
for p in write_run_svgs(out, "head_on", log, head_on_scenario(seed=1)):
    print("wrote", p)
