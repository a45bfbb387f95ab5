"""Three-stage planning around an obstacle with a teammate in the way.

A vehicle is sent across a wall gap while a teammate's published plan
blocks part of the free space. Shows the grid path, the safe-corridor
boxes and the final dynamically feasible trajectory.

Run: python3 demos/demo_planner.py  (writes demo_planner.png)
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.patches as patches
import matplotlib.pyplot as plt
import numpy as np

from formsim import Box, DynamicLimits, OccupancyGrid, UavState, hold_plan
from formsim.formation import ReferenceTrajectory
from formsim.planner import build_corridor, inflate_teammates, optimize_trajectory, plan_path

grid = OccupancyGrid.empty(np.zeros(3), np.array([20.0, 14.0, 6.0]), 0.5)
grid.add_box(Box(np.array([9.0, 0.0, 0.0]), np.array([10.0, 8.0, 6.0])))
grid.add_box(Box(np.array([9.0, 10.5, 0.0]), np.array([10.0, 14.0, 6.0])))

start = UavState(np.array([3.0, 4.0, 2.0]), 0.0, 0.0)
goal = np.array([17.0, 6.0, 2.0])
n = 61
ref = ReferenceTrajectory(0.2 * np.arange(n), np.tile(goal, (n, 1)), np.zeros(n), np.zeros(n))

teammate = hold_plan(UavState(np.array([13.0, 9.0, 2.0]), 0.0, 0.0), ref.t)
world = inflate_teammates(grid, [teammate], 2.5, 0.0, 8.0)

path = plan_path(start.p, ref, world)
corridor = build_corridor(path, world)
plan, notes = optimize_trajectory(corridor, ref, DynamicLimits(), start, np.zeros(3), path=path)
print(f"path cells: {len(path)}, corridor boxes: {len(corridor)}, notes: {notes}")
v = np.linalg.norm(np.diff(plan.pos, axis=0), axis=1) / 0.2
print(f"peak speed {v.max():.2f} m/s, final error "
      f"{np.linalg.norm(plan.pos[-1] - goal):.3f} m")

fig, ax = plt.subplots(figsize=(11, 7))
# occupied cells at the flight altitude layer
layer = world.index_of(start.p)[2]
occ = world.occ[:, :, layer]
base = grid.occ[:, :, layer]
for ix, iy in np.argwhere(occ):
    color = "0.3" if base[ix, iy] else "tab:orange"
    ax.add_patch(patches.Rectangle((ix * 0.5, iy * 0.5), 0.5, 0.5, color=color, alpha=0.6))
for lo, hi in corridor.boxes:
    ax.add_patch(
        patches.Rectangle(lo[:2], *(hi[:2] - lo[:2]), fill=False, edgecolor="tab:green", lw=1.5)
    )
pp = np.array(path)
ax.plot(pp[:, 0], pp[:, 1], ".-", color="tab:gray", label="grid path")
ax.plot(plan.pos[:, 0], plan.pos[:, 1], "-", color="tab:red", lw=2, label="trajectory")
ax.plot(*start.p[:2], "b^", markersize=10, label="start")
ax.plot(*goal[:2], "r*", markersize=14, label="reference")
ax.plot(*teammate.pos[0][:2], "ko", markersize=8, label="teammate plan")
ax.set_title("wall gap + teammate inflation (orange): path, corridor, trajectory")
ax.axis("equal")
ax.grid(alpha=0.2)
ax.legend(loc="lower right")
fig.tight_layout()
fig.savefig("demo_planner.png", dpi=120)
print("wrote demo_planner.png")
