"""The full power-line mission: run it, then plot the timeline metrics.

Executes the bundled 180 s scenario (scripted operator requests plus two
worker gestures) and renders the classic timeline: distances to the
worker, mutual distances, obstacle clearance and the observation angles
with their references, with command instants marked.

Run: python3 demos/demo_closed_loop.py  (writes demo_timeline.png, demo_topdown.png)
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from formsim import MissionLoop, bundled_scenario_path, load_scenario

sc = load_scenario(bundled_scenario_path())
loop = MissionLoop(sc)
names = [u.name for u in sc.uavs]
colors = {"leader": "tab:red", "f1": "tab:green", "f2": "tab:blue"}

log = {n: {"d_t": [], "d_o": [], "d_m": [], "beta_ref": [], "beta_act": []} for n in names}
ts, human_xy = [], []
tracks = {n: [] for n in names}
ticks = int(round(sc.duration / sc.tick_dt))
for _ in range(ticks):
    loop.step()
    ts.append(loop.t)
    human_xy.append(loop.world.human.p[:2].copy())
    for rec in loop.latest_metrics:
        n = rec["uav_id"]
        log[n]["d_t"].append(rec["d_t"])
        log[n]["d_o"].append(rec["d_o"])
        log[n]["d_m"].append(rec["d_m_min"])
        log[n]["beta_ref"].append(rec["beta_ref_deg"])
        log[n]["beta_act"].append(rec["beta_act_deg"])
    for n in names:
        tracks[n].append(loop.world.uav_states[n].p[:2].copy())

summary = loop.summary()
print("summary:", summary.to_json())
operator_ts = [e.t for e in loop.events if e.source == "OPERATOR"]
worker_ts = [e.t for e in loop.events if e.source == "WORKER_GESTURE"]

fig, axes = plt.subplots(4, 1, figsize=(11, 11), sharex=True)
panels = [("d_t", "distance to worker [m]"), ("d_m", "mutual distance [m]"),
          ("d_o", "obstacle distance [m]")]
for ax, (key, label) in zip(axes, panels):
    for n in names:
        ax.plot(ts, log[n][key], color=colors[n], label=n)
    ax.set_ylabel(label)
    ax.grid(alpha=0.3)
axes[0].legend(loc="upper right")
axes[1].axhline(sc.separation, color="k", linestyle=":", label="separation limit")
for n in names:
    axes[3].plot(ts, log[n]["beta_ref"], color=colors[n], alpha=0.35)
    axes[3].plot(ts, log[n]["beta_act"], color=colors[n])
axes[3].set_ylabel("observation angle [deg]")
axes[3].set_xlabel("time [s]")
axes[3].grid(alpha=0.3)
for ax in axes:
    for t in operator_ts:
        ax.axvline(t, color="tab:red", alpha=0.4, lw=0.8)
    for t in worker_ts:
        ax.axvline(t, color="tab:blue", alpha=0.6, lw=0.8)
axes[0].set_title("mission timeline (red: operator requests, blue: worker commands)")
fig.tight_layout()
fig.savefig("demo_timeline.png", dpi=120)

fig2, ax = plt.subplots(figsize=(9, 9))
human_xy = np.array(human_xy)
ax.plot(human_xy[:, 0], human_xy[:, 1], "k-", lw=2, label="worker")
for n in names:
    tr = np.array(tracks[n])
    ax.plot(tr[:, 0], tr[:, 1], color=colors[n], label=n, alpha=0.8)
for obs in sc.obstacles:
    if obs["type"] == "box":
        lo, hi = np.array(obs["min"]), np.array(obs["max"])
        ax.add_patch(plt.Rectangle(lo[:2], *(hi[:2] - lo[:2]), color="0.4", alpha=0.7))
ax.set_title("top-down tracks, power-line towers in gray")
ax.axis("equal")
ax.grid(alpha=0.3)
ax.legend()
fig2.tight_layout()
fig2.savefig("demo_topdown.png", dpi=120)
print("wrote demo_timeline.png, demo_topdown.png")
