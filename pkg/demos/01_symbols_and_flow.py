"""Tour of the symbol catalog and the rescaled Hamilton flow.

Evaluates the catalog symbols, integrates a few orbits on an energy shell,
and shows the radial decoupling: the fiber-radius log rho rides along the
(x, theta) dynamics without feeding back.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from viscwave import FlowPoint, builtin_library, rescaled_field
from viscwave.dynamics import integrate_flow, sample_shell
from viscwave.symbols import make_shear

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

print("symbol catalog:")
for sym in builtin_library():
    val = sym(0.3, 1.1, 0.7)
    print(f"  {sym.name:10s} params={sym.params}  p(0.3, 1.1, 0.7) = {val:+.4f}")

shear = make_shear(0.3)
q = FlowPoint(x=(np.pi / 2, 0.0), theta=0.0)
dx, dtheta, drho = rescaled_field(shear, q)
print(f"\nshear field at (x1=pi/2, theta=0): dx={dx}, dtheta={dtheta:.3f}, "
      f"drho={drho:.3f}  (radial rate +eps)")

# a few orbits on the zero shell
rng = np.random.default_rng(1)
starts = sample_shell(shear, 0.0, 6, rng)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
for s in starts:
    traj = integrate_flow(shear, FlowPoint(x=s[:2], theta=s[2]), T=60.0,
                          dt=1e-2, store_stride=5)
    drift = np.max(np.abs(shear(traj.states[:, 0], traj.states[:, 1],
                                traj.states[:, 2]) - traj.energy))
    ax1.plot(traj.states[:, 0], traj.states[:, 2], lw=0.8)
    ax2.plot(traj.times, traj.states[:, 3], lw=0.8)
    print(f"orbit from x1={s[0]:.2f}, theta={s[2]:.2f}: energy drift {drift:.1e}, "
          f"final rho {traj.states[-1, 3]:+.2f}")
ax1.set_xlabel("x1"); ax1.set_ylabel("theta")
ax1.set_title("shell orbits drift to theta in {0, pi}, x1 = +-pi/2")
ax2.set_xlabel("t"); ax2.set_ylabel("rho = log |xi|")
ax2.set_title("radial growth: orbits climb to high frequency")
fig.tight_layout()
fig.savefig(OUT / "01_orbits.png", dpi=120)
print(f"\nwrote {OUT / '01_orbits.png'}")
