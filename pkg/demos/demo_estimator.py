"""Fusing bearing + switched range sources into a worker track.

A camera watches a walking worker; UWB range drops out halfway and the
filter falls back to stereo, then to apparent size, widening its
uncertainty accordingly. Prints which source won each second and plots
the truth vs the estimate.

Run: python3 demos/demo_estimator.py  (writes demo_estimator.png)
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from formsim import (
    CameraIntrinsics,
    CameraPose,
    DistanceSources,
    MeasurementNoiseConfig,
    PixelBox,
    ProcessNoiseConfig,
    estimate_tick,
)
from formsim.geometry import camera_rotation

rng = np.random.default_rng(8)
q = ProcessNoiseConfig()
noise = MeasurementNoiseConfig()
cam = CameraPose(camera_rotation(0.0, -0.15), np.array([0.0, 0.0, 3.0]), CameraIntrinsics())

dt = 0.1
est = None
truth_log, est_log, src_log = [], [], []
pos = np.array([8.0, -1.0, 0.9])
vel = np.array([0.15, 0.2, 0.0])

for k in range(600):
    t = k * dt
    pos = pos + vel * dt
    rel = cam.rotation.T @ (pos - cam.p)
    u = cam.intrinsics.cx + cam.intrinsics.focal * rel[0] / rel[2]
    v = cam.intrinsics.cy + cam.intrinsics.focal * rel[1] / rel[2]
    h_px = cam.intrinsics.focal * 1.8 / rel[2]
    bbox = PixelBox(u - h_px / 5 + rng.normal(0, 1), v - h_px / 2 + rng.normal(0, 1),
                    u + h_px / 5 + rng.normal(0, 1), v + h_px / 2 + rng.normal(0, 1))
    true_range = float(np.linalg.norm(pos - cam.p))
    sources = DistanceSources(
        uwb=true_range + rng.normal(0, 0.1) if t < 30.0 else None,
        stereo=true_range + rng.normal(0, 0.3) if t < 45.0 else None,
        apparent=cam.intrinsics.focal * 1.8 / bbox.height,
    )
    est = estimate_tick(est, dt, bbox, cam, sources, q, noise)
    picked = "uwb" if sources.uwb else ("stereo" if sources.stereo else "apparent")
    truth_log.append(pos.copy())
    est_log.append(est.position.copy())
    src_log.append(picked)
    if k % 100 == 0:
        err = np.linalg.norm(est.position - pos)
        print(f"t={t:5.1f}s source={picked:8s} err={err:.3f} m")

truth_log = np.array(truth_log)
est_log = np.array(est_log)
errs = np.linalg.norm(truth_log - est_log, axis=1)

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(10, 7), sharex=True)
ts = dt * np.arange(len(errs))
ax1.plot(ts, truth_log[:, 0], "k--", label="truth x")
ax1.plot(ts, est_log[:, 0], "tab:red", label="estimate x")
ax1.plot(ts, truth_log[:, 1], "k:", label="truth y")
ax1.plot(ts, est_log[:, 1], "tab:blue", label="estimate y")
ax1.legend()
ax1.grid(alpha=0.3)
ax1.set_title("worker track under source switching")
colors = {"uwb": "tab:green", "stereo": "tab:orange", "apparent": "tab:red"}
ax2.scatter(ts, errs, s=4, c=[colors[s] for s in src_log])
for name, c in colors.items():
    ax2.scatter([], [], c=c, label=name)
ax2.set_ylabel("position error [m]")
ax2.set_xlabel("time [s]")
ax2.legend(title="range source")
ax2.grid(alpha=0.3)
fig.tight_layout()
fig.savefig("demo_estimator.png", dpi=120)
print("wrote demo_estimator.png")
