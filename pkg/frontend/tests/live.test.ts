// End-to-end check against a real simulator process:
// holding gesture button 4 for 8 simulated seconds produces a confirm
// frame, the gamma gauge steps +5 degrees, the parameter change never
// renders before its confirm frame, and a dropped connection flips the
// session into the disconnected banner state.

import { spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";
import { ConsoleClient, type SocketLike } from "../src/net.js";
import { firstParamChange, SessionStore } from "../src/store.js";

const PORT = 8899;
const URL = `ws://127.0.0.1:${PORT}`;

const SCENARIO = {
  name: "console-live",
  seed: 21,
  duration_s: 40.0,
  world: { bounds_min: [0, 0, 0], bounds_max: [40, 40, 12], cell_size_m: 0.5 },
  human: { waypoints: [{ t: 0.0, p: [20.0, 15.0, 0.9] }] },
  uavs: [
    { name: "leader", role: "leader", beta_deg: 90.0, gamma_deg: 11.0, distance_m: 10.0 },
    { name: "f1", role: "follower", beta_deg: 60.0, gamma_deg: 0.0, distance_m: 8.0 },
  ],
  detector: { detection_rate: 1.0, confusion: "identity", period_s: 0.3 },
};

let server: ReturnType<typeof spawn>;

function wsFactory(url: string): SocketLike {
  return new WebSocket(url) as unknown as SocketLike;
}

async function connectClient(
  role: "controller" | "observer",
): Promise<{ store: SessionStore; client: ConsoleClient }> {
  const store = new SessionStore();
  for (let attempt = 0; attempt < 60; attempt++) {
    const client = new ConsoleClient({ url: URL, role, store, socketFactory: wsFactory });
    const ok = await new Promise<boolean>((resolve) => {
      let settled = false;
      client.connect();
      const timer = setInterval(() => {
        if (store.state.connection === "connected") {
          settled = true;
          clearInterval(timer);
          resolve(true);
        } else if (store.state.connection === "disconnected") {
          settled = true;
          clearInterval(timer);
          resolve(false);
        }
      }, 20);
      setTimeout(() => {
        if (!settled) {
          clearInterval(timer);
          resolve(false);
        }
      }, 1500);
    });
    if (ok) {
      return { store, client };
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("server did not come up");
}

beforeAll(() => {
  const dir = mkdtempSync(join(tmpdir(), "formsim-live-"));
  const scenarioPath = join(dir, "scenario.json");
  writeFileSync(scenarioPath, JSON.stringify(SCENARIO));
  server = spawn(
    "python3",
    ["-m", "formsim.cli", "serve", scenarioPath, "--port", String(PORT), "--rtf", "0"],
    { stdio: "ignore" },
  );
});

afterAll(() => {
  server?.kill();
});

describe("console against a live session", () => {
  it("holding gesture 4 confirms and steps the gamma gauge by +5", async () => {
    const { store, client } = await connectClient("controller");
    const observer = await connectClient("observer");

    // wait for the first delta so we know the session clock
    await waitFor(store, (s) => s.state.world !== null && s.state.t > 0, 20000);
    const gammaBefore = store.state.params!.leader.gamma_deg;
    expect(gammaBefore).toBeCloseTo(11.0, 5);

    // hold the gesture button for 8 simulated seconds
    const t0 = store.state.t;
    client.sendGesture(4, true);
    await waitFor(store, (s) => s.state.t >= t0 + 8.0, 60000);
    client.sendGesture(4, false);

    await waitFor(
      store,
      (s) => s.state.pending.some((p) => p.kind === "gesture" && p.status === "confirmed"),
      30000,
    );
    await waitFor(store, (s) => (s.state.params?.leader.gamma_deg ?? 0) > 15.9, 30000);
    expect(store.state.params!.leader.gamma_deg).toBeCloseTo(16.0, 3);

    // instrumented log: the rendered parameter change comes after confirm
    const { changeIndex, confirmIndex } = firstParamChange(store.log, "leader", "gamma_deg");
    expect(confirmIndex).toBeGreaterThanOrEqual(0);
    expect(changeIndex).toBeGreaterThan(confirmIndex);

    // the observer saw the same confirmed state, read-only
    await waitFor(observer.store, (s) => (s.state.params?.leader.gamma_deg ?? 0) > 15.9, 30000);

    // disconnect mid-run: banner state flips, inputs disabled
    observer.client.close();
    await waitFor(observer.store, (s) => s.state.connection === "disconnected", 5000);

    client.close();
  });
});

async function waitFor(
  store: SessionStore,
  cond: (s: SessionStore) => boolean,
  timeoutMs: number,
): Promise<void> {
  const start = Date.now();
  while (Date.now() - start < timeoutMs) {
    if (cond(store)) {
      return;
    }
    if (store.state.connection === "ended") {
      throw new Error("mission ended before the condition held");
    }
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error("timeout waiting for condition");
}
