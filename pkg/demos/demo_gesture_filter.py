"""From noisy per-frame gesture IDs to confirmed commands.

Simulates a worker holding gesture 2, pausing, then holding gesture 4,
with a 95%-accurate detector. Shows the dominant-ratio signal crossing
the confirmation threshold and the debounce blocking re-triggers.

Run: python3 demos/demo_gesture_filter.py  (writes demo_gestures.png)
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from formsim import (
    DetectorEmulatorModel,
    GestureFilter,
    GestureFilterConfig,
    emulate_detection,
    map_gesture,
)

rng = np.random.default_rng(4)
model = DetectorEmulatorModel.diagonal(5, accuracy=0.95, detection_rate=0.97)
cfg = GestureFilterConfig(window=20, stale_after=20.0, ratio_threshold=0.8, debounce=5.0)
filt = GestureFilter(cfg)


def true_gesture(t):
    if 3.0 <= t < 12.0:
        return 2
    if 20.0 <= t < 29.0:
        return 4
    return 0


ts, gts, dets, ratios, dominants, confirms = [], [], [], [], [], []
t = 0.0
while t < 35.0:
    t += 0.3
    det = emulate_detection(true_gesture(t), t, model, rng)
    confirmed = filt.update(det, t)
    dom, ratio = filt.dominant()
    ts.append(t)
    gts.append(true_gesture(t))
    dets.append(det.id if det else -1)
    ratios.append(ratio)
    dominants.append(dom)
    if confirmed is not None:
        confirms.append((t, confirmed))
        delta = map_gesture(confirmed)
        desc = f"{delta.param} {'+' if delta.delta > 0 else ''}{np.degrees(delta.delta):.0f} deg"
        print(f"t={t:5.1f}s confirmed gesture {confirmed} -> {desc}")

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
ax1.step(ts, gts, where="post", color="k", label="performed")
ax1.plot(ts, dets, ".", color="tab:gray", markersize=4, alpha=0.6, label="detected")
ax1.step(ts, dominants, where="post", color="tab:blue", alpha=0.7, label="dominant")
for tc, gid in confirms:
    ax1.axvline(tc, color="tab:red", linestyle="--")
ax1.set_ylabel("gesture id")
ax1.legend(loc="upper right")
ax1.grid(alpha=0.3)
ax1.set_title("detector stream, dominant gesture and confirmations (red)")
ax2.plot(ts, ratios, color="tab:blue")
ax2.axhline(cfg.ratio_threshold, color="tab:green", label="confirmation threshold")
for tc, _ in confirms:
    ax2.axvline(tc, color="tab:red", linestyle="--")
ax2.set_ylabel("dominant ratio")
ax2.set_xlabel("time [s]")
ax2.legend()
ax2.grid(alpha=0.3)
fig.tight_layout()
fig.savefig("demo_gestures.png", dpi=120)
print("wrote demo_gestures.png")
