import { describe, expect, it } from "vitest";
import type { DeltaFrame, ServerFrame, SnapshotFrame } from "../src/protocol.js";
import { SessionStore, firstParamChange } from "../src/store.js";

const WORLD = {
  human: { p: [20, 15, 0.9] as [number, number, number], heading_deg: 0, gesture: 0 },
  estimate: null,
  uavs: [
    {
      name: "leader",
      role: "leader" as const,
      p: [20, 24.8, 2.8] as [number, number, number],
      heading_deg: -90,
      pitch_deg: -11,
    },
  ],
};

function snapshot(gamma = 11): SnapshotFrame {
  return {
    type: "snapshot",
    protocol: 1,
    t: 0,
    world: WORLD,
    params: { leader: { beta_deg: 90, gamma_deg: gamma, distance_m: 10 } },
    gesture: { g_d: -1, g_f: 0, f_d: 0 },
    metrics: [],
    history: [],
    config: {
      bounds_min: [0, 0, 0],
      bounds_max: [40, 40, 12],
      obstacles: [],
      separation_m: 2.5,
      uav_names: ["leader"],
      leader: "leader",
      gesture_ids: [1, 2, 3, 4],
      duration_s: 60,
    },
  };
}

function delta(t: number, gamma: number): DeltaFrame {
  return {
    type: "delta",
    t,
    world: WORLD,
    params: { leader: { beta_deg: 90, gamma_deg: gamma, distance_m: 10 } },
    gesture: { g_d: 4, g_f: 4, f_d: 1.0 },
    metrics: [],
  };
}

const confirm: ServerFrame = {
  type: "confirm",
  t: 6.0,
  source: "WORKER_GESTURE",
  status: "confirmed",
  command: { gesture_id: 4, uav: "leader", param: "gamma" },
};

describe("session store", () => {
  it("applies snapshot then deltas", () => {
    const store = new SessionStore();
    store.apply(snapshot(), 1000);
    expect(store.state.params!.leader.gamma_deg).toBe(11);
    store.apply(delta(1.0, 11), 1100);
    expect(store.state.t).toBe(1.0);
    expect(store.state.connection).toBe("connected");
  });

  it("never renders a parameter change before its confirm frame", () => {
    const store = new SessionStore();
    store.apply(snapshot(), 0);
    // server orders frames: deltas at old value, confirm, delta at new value
    store.apply(delta(5.8, 11), 10);
    store.apply(delta(5.9, 11), 20);
    store.apply(confirm, 30);
    store.apply(delta(6.0, 16), 40);
    const { changeIndex, confirmIndex } = firstParamChange(store.log, "leader", "gamma_deg");
    expect(confirmIndex).toBeGreaterThanOrEqual(0);
    expect(changeIndex).toBeGreaterThan(confirmIndex);
  });

  it("tracks pending commands and resolves them on confirm", () => {
    const store = new SessionStore();
    store.apply(snapshot(), 0);
    const cmd = store.commandSent({
      kind: "gesture",
      label: "gesture 4",
      sentAtMs: 1,
      gestureId: 4,
    });
    expect(cmd.status).toBe("pending");
    store.apply(confirm, 50);
    expect(store.state.pending[0].status).toBe("confirmed");
  });

  it("marks the oldest pending command rejected on an error frame", () => {
    const store = new SessionStore();
    store.apply(snapshot(), 0);
    store.commandSent({ kind: "operator", label: "x", sentAtMs: 1, uav: "leader", param: "beta" });
    store.apply({ type: "error", message: "only the controller can send commands" }, 10);
    expect(store.state.pending[0].status).toBe("rejected");
    expect(store.state.errors).toHaveLength(1);
  });

  it("reports staleness after two seconds without frames", () => {
    const store = new SessionStore();
    store.apply(snapshot(), 1000);
    expect(store.isStale(2500)).toBe(false);
    expect(store.isStale(3200)).toBe(true);
    store.apply(delta(1.0, 11), 4000);
    expect(store.isStale(4100)).toBe(false);
  });

  it("keeps disconnected sessions out of the stale banner", () => {
    const store = new SessionStore();
    expect(store.isStale(99999)).toBe(false);
  });

  it("an end frame finishes the session", () => {
    const store = new SessionStore();
    store.apply(snapshot(), 0);
    store.apply({ type: "end", t: 60, summary: { ticks: 600 } }, 10);
    expect(store.state.connection).toBe("ended");
    expect(store.state.endSummary).toEqual({ ticks: 600 });
  });
});
