"""Where the formation places each vehicle, and how parameters reshape it.

Plots the leader and two followers around a worker for the default
parameter set, then sweeps the leader's horizontal observation angle to
show the whole formation rotating with it.

Run: python3 demos/demo_formation_geometry.py  (writes demo_formation.png)
"""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from formsim import FormationParams, HumanState, boresight, follower_reference, leader_reference

human = HumanState(np.array([0.0, 0.0, 0.9]), heading=0.0)
leader_prm = FormationParams(math.radians(90), math.radians(11), 10.0)
follower_prms = {
    "f1": FormationParams(math.radians(60), 0.0, 8.0),
    "f2": FormationParams(math.radians(-60), 0.0, 8.0),
}

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(12, 6))

# --- left: the default formation with camera rays -------------------------
lead = leader_reference(human, leader_prm)
ax1.plot(*human.p[:2], "k*", markersize=16, label="worker")
ax1.annotate("", xy=human.p[:2] + [1.5, 0.0], xytext=human.p[:2],
             arrowprops=dict(arrowstyle="->", color="k"))
for name, state, color in [
    ("leader", lead, "tab:red"),
    ("f1", follower_reference(human, lead, follower_prms["f1"]), "tab:blue"),
    ("f2", follower_reference(human, lead, follower_prms["f2"]), "tab:green"),
]:
    ax1.plot(*state.p[:2], "o", color=color, markersize=10, label=f"{name} (z={state.p[2]:.1f} m)")
    ray = boresight(state.heading, state.pitch) * 3.0
    ax1.annotate("", xy=state.p[:2] + ray[:2], xytext=state.p[:2],
                 arrowprops=dict(arrowstyle="->", color=color))
ax1.set_title("default formation, cameras on the worker")
ax1.axis("equal")
ax1.grid(alpha=0.3)
ax1.legend()

# --- right: sweeping the leader's horizontal angle -------------------------
for beta_deg in range(0, 360, 30):
    prm = FormationParams(math.radians(beta_deg), math.radians(11), 10.0)
    lead = leader_reference(human, prm)
    f1 = follower_reference(human, lead, follower_prms["f1"])
    f2 = follower_reference(human, lead, follower_prms["f2"])
    ax2.plot(*lead.p[:2], "o", color="tab:red", alpha=0.5)
    ax2.plot(*f1.p[:2], ".", color="tab:blue", alpha=0.5)
    ax2.plot(*f2.p[:2], ".", color="tab:green", alpha=0.5)
ax2.plot(0, 0, "k*", markersize=16)
ax2.set_title("one leader-angle knob sweeps the whole formation")
ax2.axis("equal")
ax2.grid(alpha=0.3)

fig.tight_layout()
fig.savefig("demo_formation.png", dpi=120)
print("distance identities:")
for beta_deg in (0, 90, 150):
    prm = FormationParams(math.radians(beta_deg), math.radians(11), 10.0)
    lead = leader_reference(human, prm)
    print(f"  beta={beta_deg:3d} deg -> |leader - worker| = "
          f"{np.linalg.norm(lead.p - human.p):.12f} m")
print("wrote demo_formation.png")
