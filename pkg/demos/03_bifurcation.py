"""
Pitchfork of the reduced two-airplane opinion system
=====================================================
"""

# %%
# With shared attention u, self-weight = coupling = kappa and damping d, the
# neutral opinion loses stability at u* = d / (2 kappa). Above it two
# agreeing branches appear.

from pathlib import Path

from blockfree.analysis import bifurcation_sweep, find_equilibria
from blockfree.svg import write_bifurcation_svg

out = Path(__file__).parent / "out"

sw = bifurcation_sweep((0.0, 1.0), 100, d=1.0, kappa=1.0)
print("predicted u*:", sw.predicted_critical, " detected:", sw.detected_critical, " bracket:", sw.bracket)
write_bifurcation_svg(out, "unit", sw)

# %%
# The slice at u = 1.

for e in find_equilibria(1.0):
    print(f"  z = ({e.z1:+.6f}, {e.z2:+.6f})  {'stable' if e.stable else 'unstable'}")

# %%
# The simulation parameters use self-weight 1 and coupling 4. The consensus
# mode then destabilizes at d / (a_self + gamma) = 0.6, far below the peak
# attention k1 / k2 = 20 reached while blocked.

for u in (0.55, 0.65):
    print(u, len(find_equilibria(u, d=3.0, kappa=1.0, gamma=4.0)), "equilibria")
