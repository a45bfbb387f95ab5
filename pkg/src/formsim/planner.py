"""Three-stage receding-horizon trajectory generation.

Each vehicle turns its reference trajectory into a dynamically feasible,
collision-free plan: first a shortest grid path toward the reference
endpoint, then a corridor of overlapping free axis-aligned boxes grown
around that path, then a clamped double-integrator tracker confined to
the corridor. Teammates' published plans are inflated by the mutual
separation radius and treated as obstacles, so simultaneous replanning
stays deadlock-free by construction.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .formation import ReferenceTrajectory
from .geometry import UavState, angle_diff, azimuth_of, elevation_of, wrap_angle
from .mapping import OccupancyGrid

# proportional gain [1/s] of the reference chase inside the optimizer
TRACKING_GAIN = 2.5


@dataclass
class DynamicLimits:
    """Vehicle envelope used by both the planner and the plant."""

    v_max: float = 3.0
    a_max: float = 2.0
    ang_rate_max: float = 1.5

    def __post_init__(self):
        if self.v_max <= 0 or self.a_max <= 0 or self.ang_rate_max <= 0:
            raise ValueError("dynamic limits must be positive")


@dataclass
class PlannedTrajectory:
    """Feasible timed trajectory: positions, velocities, camera angles."""

    t: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    heading: np.ndarray
    pitch: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.pos = np.asarray(self.pos, dtype=float)
        self.vel = np.asarray(self.vel, dtype=float)
        self.heading = np.asarray(self.heading, dtype=float)
        self.pitch = np.asarray(self.pitch, dtype=float)

    def __len__(self) -> int:
        return len(self.t)

    def state_at(self, time: float) -> tuple[np.ndarray, np.ndarray, float, float]:
        """Interpolated (position, velocity, heading, pitch) at a time.

        Clamps outside the sampled span; angles interpolate along the
        shortest arc.
        """
        t = self.t
        if time <= t[0]:
            i, w = 0, 0.0
        elif time >= t[-1]:
            i, w = len(t) - 2, 1.0
        else:
            i = int(np.searchsorted(t, time, side="right")) - 1
            w = (time - t[i]) / (t[i + 1] - t[i])
        if len(t) == 1:
            return self.pos[0].copy(), self.vel[0].copy(), float(self.heading[0]), float(self.pitch[0])
        p = (1 - w) * self.pos[i] + w * self.pos[i + 1]
        v = (1 - w) * self.vel[i] + w * self.vel[i + 1]
        h = wrap_angle(self.heading[i] + w * angle_diff(self.heading[i + 1], self.heading[i]))
        x = self.pitch[i] + w * (self.pitch[i + 1] - self.pitch[i])
        return p, v, float(h), float(x)


@dataclass
class Corridor:
    """Chain of overlapping free boxes (world AABBs) covering a path."""

    boxes: list[tuple[np.ndarray, np.ndarray]]

    def __len__(self) -> int:
        return len(self.boxes)

    @staticmethod
    def _contains(box, p, tol: float = 1e-9) -> bool:
        lo, hi = box
        return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))

    def contains(self, p) -> bool:
        return any(self._contains(b, p) for b in self.boxes)


# --- teammate inflation -----------------------------------------------------


def inflate_teammates(
    grid: OccupancyGrid,
    teammate_plans: list[PlannedTrajectory],
    separation: float,
    t0: float,
    window: float,
) -> OccupancyGrid:
    """Grid copy with teammates' planned samples swollen to obstacles.

    Every plan sample inside [t0, t0 + window] is marked as a sphere of
    the separation radius. Samples outside the grid volume are clipped by
    the rasterizer.
    """
    if separation <= 0:
        raise ValueError("separation must be positive")
    if not teammate_plans:
        return grid
    out = grid.copy()
    for plan in teammate_plans:
        keep = (plan.t >= t0 - 1e-9) & (plan.t <= t0 + window + 1e-9)
        for p in plan.pos[keep]:
            out.mark_sphere(p, separation)
    return out


# --- stage 1: grid path ------------------------------------------------------

_NEIGHBORS = [
    (dx, dy, dz, math.sqrt(dx * dx + dy * dy + dz * dz))
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
]


@lru_cache(maxsize=4)
def _sorted_cube_offsets(r: int) -> tuple[tuple[int, int, int], ...]:
    ax = np.arange(-r, r + 1)
    dx, dy, dz = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([dx.ravel(), dy.ravel(), dz.ravel()], axis=1)
    order = np.argsort(np.einsum("ij,ij->i", pts, pts), kind="stable")
    return tuple(tuple(int(v) for v in pts[i]) for i in order)


def nearest_free_cell(grid: OccupancyGrid, point, max_radius_cells: int = 10):
    """Free cell index nearest (euclidean) to a world point, or None."""
    rel = (np.asarray(point, dtype=float) - grid.origin) / grid.cell - 0.5
    base = np.round(rel).astype(int)
    shape = grid.shape
    for off in _sorted_cube_offsets(max_radius_cells):
        ix, iy, iz = base[0] + off[0], base[1] + off[1], base[2] + off[2]
        if 0 <= ix < shape[0] and 0 <= iy < shape[1] and 0 <= iz < shape[2]:
            if not grid.occ[ix, iy, iz]:
                return (ix, iy, iz)
    return None


def plan_path(
    start, ref: ReferenceTrajectory, grid: OccupancyGrid, margin_cells: int = 12,
    max_expansions: int = 40000,
) -> list[np.ndarray] | None:
    """Shortest 26-connected free path from start toward the reference end.

    Returns cell-center waypoints (start cell first) or None when the goal
    is unreachable inside the search crop. The search is restricted to the
    bounding box of start and goal padded by margin_cells.
    """
    start_idx = grid.index_of(start)
    if start_idx is None or grid.occ[start_idx]:
        raise ValueError("start must lie in a free cell inside the grid")
    goal_idx = nearest_free_cell(grid, ref.pos[-1])
    if goal_idx is None:
        return None
    if start_idx == goal_idx:
        return [grid.center_of(start_idx)]

    shape = grid.shape
    lo = [max(0, min(start_idx[a], goal_idx[a]) - margin_cells) for a in range(3)]
    hi = [min(shape[a] - 1, max(start_idx[a], goal_idx[a]) + margin_cells) for a in range(3)]
    occ = grid.occ
    gx, gy, gz = goal_idx
    cell = grid.cell

    def h(ix, iy, iz):
        return math.sqrt((ix - gx) ** 2 + (iy - gy) ** 2 + (iz - gz) ** 2) * cell

    g = {start_idx: 0.0}
    came: dict = {}
    heap = [(h(*start_idx), 0, start_idx)]
    tie = 1
    expansions = 0
    while heap:
        f, _, cur = heapq.heappop(heap)
        if cur == goal_idx:
            path = [cur]
            while path[-1] in came:
                path.append(came[path[-1]])
            path.reverse()
            return [grid.center_of(i) for i in path]
        if f - h(*cur) > g[cur] + 1e-12:
            continue
        expansions += 1
        if expansions > max_expansions:
            return None
        cx, cy, cz = cur
        gc = g[cur]
        for dx, dy, dz, w in _NEIGHBORS:
            ix, iy, iz = cx + dx, cy + dy, cz + dz
            if not (lo[0] <= ix <= hi[0] and lo[1] <= iy <= hi[1] and lo[2] <= iz <= hi[2]):
                continue
            if occ[ix, iy, iz]:
                continue
            nxt = (ix, iy, iz)
            ng = gc + w * cell
            if ng < g.get(nxt, math.inf) - 1e-12:
                g[nxt] = ng
                came[nxt] = cur
                heapq.heappush(heap, (ng + h(ix, iy, iz), tie, nxt))
                tie += 1
    return None


# --- stage 2: safe corridor ---------------------------------------------


def _expand_box(grid: OccupancyGrid, seed, lo_bound, hi_bound, max_dim: int = 40):
    """Greedy axis-aligned growth of an all-free index box around a cell."""
    lo = list(seed)
    hi = list(seed)
    occ = grid.occ
    grew = True
    while grew:
        grew = False
        for axis in range(3):
            if hi[axis] - lo[axis] + 1 >= max_dim:
                continue
            if hi[axis] + 1 <= hi_bound[axis]:
                sl = [slice(lo[0], hi[0] + 1), slice(lo[1], hi[1] + 1), slice(lo[2], hi[2] + 1)]
                sl[axis] = slice(hi[axis] + 1, hi[axis] + 2)
                if not occ[tuple(sl)].any():
                    hi[axis] += 1
                    grew = True
            if lo[axis] - 1 >= lo_bound[axis]:
                sl = [slice(lo[0], hi[0] + 1), slice(lo[1], hi[1] + 1), slice(lo[2], hi[2] + 1)]
                sl[axis] = slice(lo[axis] - 1, lo[axis])
                if not occ[tuple(sl)].any():
                    lo[axis] -= 1
                    grew = True
    return tuple(lo), tuple(hi)


def build_corridor(path: list[np.ndarray], grid: OccupancyGrid, margin_cells: int = 12) -> Corridor:
    """Grow overlapping free boxes along a collision-free path.

    Consecutive boxes share at least the cell of the seeding waypoint; in
    tight passages boxes may degenerate to single cells that share a face.
    """
    cells = []
    for p in path:
        idx = grid.index_of(p)
        if idx is None or grid.occ[idx]:
            raise ValueError("corridor path must stay in free cells")
        cells.append(idx)
    shape = grid.shape
    lo_bound = [max(0, min(c[a] for c in cells) - margin_cells) for a in range(3)]
    hi_bound = [min(shape[a] - 1, max(c[a] for c in cells) + margin_cells) for a in range(3)]

    boxes = []
    i = 0
    while True:
        lo, hi = _expand_box(grid, cells[i], lo_bound, hi_bound)
        world_lo = grid.origin + np.array(lo) * grid.cell
        world_hi = grid.origin + (np.array(hi) + 1.0) * grid.cell
        if not boxes or not (np.all(world_lo == boxes[-1][0]) and np.all(world_hi == boxes[-1][1])):
            boxes.append((world_lo, world_hi))
        j = i
        while j + 1 < len(cells) and all(lo[a] <= cells[j + 1][a] <= hi[a] for a in range(3)):
            j += 1
        if j == len(cells) - 1:
            break
        i = j if j > i else j + 1
    return Corridor(boxes)


# --- stage 3: corridor-constrained tracking ------------------------------


def _wall_clamp(v, p, boxes, a_max: float, dt: float, margin: float = 1e-3):
    """Clamp a velocity so the vehicle can always stop inside a box.

    Per-axis braking caps are evaluated inside every active box containing
    the position; the candidate that preserves the most speed wins, which
    makes the vehicle slide along walls toward box overlaps instead of
    stopping dead at a face. The per-axis budget a_max/sqrt(3) keeps the
    combined braking vector inside the acceleration envelope.
    """
    a_axis = a_max / math.sqrt(3.0)
    safety = margin + a_axis * dt * dt
    if not any(
        np.all(p >= lo - 1e-9) and np.all(p <= hi + 1e-9) for lo, hi in boxes
    ):
        return np.zeros(3)
    cand = np.asarray(v, dtype=float).copy()
    for a in range(3):
        if cand[a] == 0.0:
            continue
        free = _axis_extent(boxes, p, a, +1 if cand[a] > 0.0 else -1)
        cap = braking_speed_cap(max(free - safety, 0.0), a_axis, dt)
        if cand[a] > 0.0:
            cand[a] = min(cand[a], cap)
        else:
            cand[a] = max(cand[a], -cap)
    return cand


def _axis_extent(boxes, p, axis: int, sign: int) -> float:
    """Free travel along one axis from p through the union of the boxes.

    Walks across shared faces so a chain of overlapping boxes is traversed
    as one free interval.
    """
    q = np.asarray(p, dtype=float).copy()
    total = 0.0
    for _ in range(len(boxes) + 1):
        step = -1.0
        for lo, hi in boxes:
            if not (np.all(q >= lo - 1e-6) and np.all(q <= hi + 1e-6)):
                continue
            d = (hi[axis] - q[axis]) if sign > 0 else (q[axis] - lo[axis])
            step = max(step, d)
        if step <= 1e-9:
            break
        total += step
        q[axis] += sign * step
    return total


def _project_box(p, lo, hi, margin: float = 0.0):
    return np.minimum(np.maximum(p, lo + margin), hi - margin)


def braking_speed_cap(distance: float, a_max: float, dt: float) -> float:
    """Largest speed that can still stop within `distance`.

    Discrete-time bound for a per-step velocity change of a_max * dt: the
    stopping distance of speed s is s*dt/2 + s^2/(2 a_max).
    """
    if distance <= 0.0:
        return 0.0
    half = 0.5 * a_max * dt
    return -half + math.sqrt(half * half + 2.0 * a_max * distance)


class _RoutePursuit:
    """Carrot on the grid route, a fixed lookahead ahead of the vehicle.

    The vehicle's progress is the monotone projection of its position onto
    the path; targeting a point slightly ahead of that pulls the chase
    around obstacles instead of against corridor walls. Returns None once
    the remaining route is inside the lookahead (direct chase takes over).
    """

    def __init__(self, path, lookahead: float):
        self.pts = np.asarray(path, dtype=float)
        seg = np.diff(self.pts, axis=0)
        self.seg = seg
        self.seg_len = np.linalg.norm(seg, axis=1)
        self.arc = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        self.total = float(self.arc[-1])
        self.lookahead = lookahead
        self.s = 0.0

    def _project(self, p) -> float:
        best = None
        for i in range(len(self.seg)):
            if self.arc[i + 1] < self.s:
                continue
            L = self.seg_len[i]
            if L < 1e-12:
                continue
            w = float(np.dot(p - self.pts[i], self.seg[i]) / (L * L))
            w = min(max(w, 0.0), 1.0)
            q = self.pts[i] + w * self.seg[i]
            d = float(np.linalg.norm(p - q))
            s = self.arc[i] + w * L
            if best is None or d < best[0]:
                best = (d, s)
        return self.s if best is None else max(self.s, best[1])

    def carrot(self, p):
        """(target point, remaining route length) or (None, 0) when done."""
        self.s = self._project(p)
        aim = self.s + self.lookahead
        if aim >= self.total:
            return None, 0.0
        i = int(np.searchsorted(self.arc, aim, side="right")) - 1
        w = (aim - self.arc[i]) / self.seg_len[i]
        return self.pts[i] + w * self.seg[i], self.total - self.s


def optimize_trajectory(
    corridor: Corridor,
    ref: ReferenceTrajectory,
    limits: DynamicLimits,
    start_state: UavState,
    start_vel: np.ndarray,
    look_at: np.ndarray | None = None,
    path: "list | None" = None,
) -> tuple[PlannedTrajectory, list[str]]:
    """Track the reference inside the corridor under the dynamic limits.

    A double integrator chases per-step targets with acceleration and
    speed clamps; the speed along the motion direction is additionally
    capped so the vehicle can always stop before leaving the corridor.
    When the grid route to the reference detours around obstacles, the
    early targets follow the route so progress is made through gaps
    rather than against walls. look_at optionally supplies per-sample
    points the camera should face (otherwise the reference camera angles
    are tracked). Returns the plan and a list of diagnostics.
    """
    notes: list[str] = []
    n = len(ref)
    dt = float(ref.t[1] - ref.t[0]) if n > 1 else 1.0
    p = start_state.p.astype(float).copy()
    v = np.asarray(start_vel, dtype=float).copy()
    if not corridor.contains(p):
        lo, hi = corridor.boxes[0]
        p = _project_box(p, lo, hi, margin=1e-6)
        notes.append("start outside corridor; re-anchored to nearest corridor point")

    # the route pursuit engages only when the grid route detours around
    # something; in open space the quantized cell path would only add noise
    pursuit = None
    if path is not None and len(path) >= 2:
        pts = np.asarray(path, dtype=float)
        route_len = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
        route_len += float(np.linalg.norm(ref.pos[-1] - pts[-1]))
        straight = float(np.linalg.norm(ref.pos[-1] - p))
        if route_len > straight + max(0.75, 0.15 * straight):
            pursuit = _RoutePursuit(path, lookahead=max(1.0, 2.0 * limits.v_max * dt))

    pos = np.empty((n, 3))
    vel = np.empty((n, 3))
    heading = np.empty(n)
    pitch = np.empty(n)
    pos[0] = p
    vel[0] = v
    heading[0] = start_state.heading
    pitch[0] = start_state.pitch

    box_idx = 0
    a_dt = limits.a_max * dt
    for k in range(1, n):
        # proportional chase of the per-step target: the finite gain keeps
        # measurement jitter in the reference from being amplified, while
        # the braking cap on the remaining travel prevents overshooting the
        # trajectory's end after step changes several meters away
        target = ref.pos[k]
        route_left = 0.0
        if pursuit is not None:
            carrot, left = pursuit.carrot(p)
            if carrot is None:
                pursuit = None
            else:
                target, route_left = carrot, left
        err = target - p
        dist = float(np.linalg.norm(err))
        if dist > 1e-12:
            if route_left > 0.0:
                end_dist = dist + route_left
            else:
                end_dist = float(np.linalg.norm(ref.pos[-1] - p))
            want = min(TRACKING_GAIN * dist, limits.v_max,
                       braking_speed_cap(end_dist, limits.a_max, dt))
            v_des = err * (want / dist)
        else:
            v_des = np.zeros(3)
        v_des = _wall_clamp(v_des, p, corridor.boxes[box_idx : box_idx + 3],
                            limits.a_max, dt)
        dv = v_des - v
        dv_norm = float(np.linalg.norm(dv))
        if dv_norm > a_dt:
            dv *= a_dt / dv_norm
        v_new = v + dv
        speed = float(np.linalg.norm(v_new))
        if speed > limits.v_max:
            v_new *= limits.v_max / speed
        p_new = p + v_new * dt
        if not corridor.contains(p_new):
            # numerical backstop; the braking cap makes this a tiny correction
            best = None
            for lo, hi in corridor.boxes[box_idx : box_idx + 3]:
                q = _project_box(p_new, lo, hi, margin=1e-6)
                d = float(np.linalg.norm(q - p_new))
                if best is None or d < best[0]:
                    best = (d, q)
            p_new = best[1]
            v_new = (p_new - p) / dt
        while box_idx + 1 < len(corridor.boxes) and Corridor._contains(
            corridor.boxes[box_idx + 1], p_new
        ):
            box_idx += 1
        p, v = p_new, v_new
        pos[k] = p
        vel[k] = v

    # camera angles: face the per-sample target, slewed at the rate limit
    max_step = limits.ang_rate_max * dt
    for k in range(1, n):
        if look_at is not None:
            offs = look_at[k] - pos[k]
            if np.linalg.norm(offs[:2]) > 1e-9 or abs(offs[2]) > 1e-9:
                want_h = azimuth_of(offs)
                want_x = elevation_of(offs)
            else:
                want_h, want_x = heading[k - 1], pitch[k - 1]
        else:
            want_h = float(ref.heading[k])
            want_x = float(ref.pitch[k])
        dh = angle_diff(want_h, heading[k - 1])
        heading[k] = wrap_angle(heading[k - 1] + max(-max_step, min(max_step, dh)))
        dx = want_x - pitch[k - 1]
        pitch[k] = pitch[k - 1] + max(-max_step, min(max_step, dx))
    return PlannedTrajectory(ref.t.copy(), pos, vel, heading, pitch), notes


# --- composition ----------------------------------------------------------


def hold_plan(state: UavState, times: np.ndarray, look_at: np.ndarray | None = None) -> PlannedTrajectory:
    """Plan that parks at the current position, optionally watching a point."""
    n = len(times)
    heading, pitch = state.heading, state.pitch
    if look_at is not None:
        offs = np.asarray(look_at, dtype=float) - state.p
        if np.linalg.norm(offs) > 1e-9:
            heading = azimuth_of(offs)
            pitch = elevation_of(offs)
    return PlannedTrajectory(
        np.asarray(times, dtype=float),
        np.tile(state.p, (n, 1)),
        np.zeros((n, 3)),
        np.full(n, heading),
        np.full(n, pitch),
    )


def replan(
    state: UavState,
    velocity: np.ndarray,
    ref: ReferenceTrajectory,
    grid: OccupancyGrid,
    teammate_plans: list[PlannedTrajectory],
    separation: float,
    limits: DynamicLimits,
    look_at: np.ndarray | None = None,
) -> tuple[PlannedTrajectory, list[str]]:
    """One receding-horizon planning cycle for a single vehicle.

    Composes teammate inflation, path search, corridor construction and
    corridor-constrained tracking. Any stage failure degrades to a
    hold-position plan with a diagnostic.
    """
    window = float(ref.t[-1] - ref.t[0]) if len(ref) > 1 else 0.0
    world = inflate_teammates(grid, teammate_plans, separation, float(ref.t[0]), window)
    notes: list[str] = []

    start_idx = world.index_of(state.p)
    start_point = state.p
    start_state = state
    if start_idx is None:
        notes.append("vehicle outside grid; holding position")
        return hold_plan(state, ref.t, look_at[0] if look_at is not None else None), notes
    if world.occ[start_idx]:
        free = nearest_free_cell(world, state.p)
        if free is None:
            notes.append("no free cell near vehicle; holding position")
            return hold_plan(state, ref.t, look_at[0] if look_at is not None else None), notes
        start_point = world.center_of(free)
        start_state = UavState(start_point, state.heading, state.pitch)
        notes.append("start cell occupied; planning from nearest free cell")

    path = plan_path(start_point, ref, world)
    if path is None:
        notes.append("reference unreachable; holding position")
        return hold_plan(state, ref.t, look_at[0] if look_at is not None else None), notes
    corridor = build_corridor(path, world)
    plan, opt_notes = optimize_trajectory(
        corridor, ref, limits, start_state, velocity, look_at, path=path
    )
    notes.extend(opt_notes)
    return plan, notes
