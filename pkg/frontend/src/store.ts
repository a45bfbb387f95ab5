// Session state derived exclusively from server frames. The store never
// simulates: parameters and poses render only what the server sent, and
// commands the user issued stay visibly "pending" until the matching
// confirm frame arrives. Every applied frame is kept in an instrumented
// log so ordering properties (no parameter change rendered before its
// confirm) can be asserted mechanically.

import type {
  ConfirmFrame,
  GestureView,
  MetricRow,
  ParamsView,
  Role,
  ServerFrame,
  SessionConfig,
  WorldView,
} from "./protocol.js";

export type ConnectionState = "disconnected" | "connecting" | "connected" | "ended";

export interface PendingCommand {
  seq: number;
  kind: "gesture" | "operator";
  label: string;
  sentAtMs: number;
  status: "pending" | "confirmed" | "rejected";
  gestureId?: number;
  uav?: string;
  param?: string;
}

export interface LogEntry {
  seq: number;
  frame: ServerFrame;
  paramsBefore: ParamsView | null;
  paramsAfter: ParamsView | null;
}

export interface SessionState {
  connection: ConnectionState;
  role: Role | null;
  scenario: string | null;
  config: SessionConfig | null;
  t: number;
  world: WorldView | null;
  params: ParamsView | null;
  gesture: GestureView | null;
  metrics: MetricRow[];
  serverHistory: Array<Record<string, unknown>>;
  pending: PendingCommand[];
  errors: string[];
  lastFrameAtMs: number;
  endSummary: Record<string, unknown> | null;
}

export const STALE_AFTER_MS = 2000;

export function initialState(): SessionState {
  return {
    connection: "disconnected",
    role: null,
    scenario: null,
    config: null,
    t: 0,
    world: null,
    params: null,
    gesture: null,
    metrics: [],
    serverHistory: [],
    pending: [],
    errors: [],
    lastFrameAtMs: 0,
    endSummary: null,
  };
}

export class SessionStore {
  state: SessionState = initialState();
  log: LogEntry[] = [];
  private seq = 0;
  private pendingSeq = 0;

  connecting(): void {
    this.state.connection = "connecting";
  }

  disconnected(): void {
    this.state.connection = "disconnected";
  }

  /** Record a command the user just sent; it renders as pending. */
  commandSent(cmd: Omit<PendingCommand, "seq" | "status">): PendingCommand {
    const entry: PendingCommand = { ...cmd, seq: ++this.pendingSeq, status: "pending" };
    this.state.pending.push(entry);
    if (this.state.pending.length > 50) {
      this.state.pending.shift();
    }
    return entry;
  }

  isStale(nowMs: number): boolean {
    return (
      this.state.connection === "connected" &&
      this.state.lastFrameAtMs > 0 &&
      nowMs - this.state.lastFrameAtMs > STALE_AFTER_MS
    );
  }

  apply(frame: ServerFrame, nowMs: number): void {
    const before = this.state.params;
    switch (frame.type) {
      case "hello":
        this.state.connection = "connected";
        this.state.role = frame.role;
        this.state.scenario = frame.scenario;
        this.state.t = frame.t;
        break;
      case "snapshot":
        this.state.connection = "connected";
        this.state.t = frame.t;
        this.state.world = frame.world;
        this.state.params = frame.params;
        this.state.gesture = frame.gesture;
        this.state.metrics = frame.metrics;
        this.state.serverHistory = frame.history.slice();
        this.state.config = frame.config;
        break;
      case "delta":
        this.state.t = frame.t;
        this.state.world = frame.world;
        this.state.params = frame.params;
        this.state.gesture = frame.gesture;
        this.state.metrics = frame.metrics;
        break;
      case "confirm":
        this.state.serverHistory.push({
          t: frame.t,
          source: frame.source,
          status: frame.status,
          ...frame.command,
        });
        if (this.state.serverHistory.length > 100) {
          this.state.serverHistory.shift();
        }
        this.resolvePending(frame);
        break;
      case "error": {
        this.state.errors.push(frame.message);
        if (this.state.errors.length > 20) {
          this.state.errors.shift();
        }
        // a rejection settles the oldest pending command
        const open = this.state.pending.find((p) => p.status === "pending");
        if (open) {
          open.status = "rejected";
        }
        break;
      }
      case "end":
        this.state.connection = "ended";
        this.state.t = frame.t;
        this.state.endSummary = frame.summary;
        break;
    }
    this.state.lastFrameAtMs = nowMs;
    this.log.push({
      seq: ++this.seq,
      frame,
      paramsBefore: before,
      paramsAfter: this.state.params,
    });
  }

  private resolvePending(frame: ConfirmFrame): void {
    const cmd = frame.command as { gesture_id?: number; uav?: string; param?: string };
    for (const p of this.state.pending) {
      if (p.status !== "pending") {
        continue;
      }
      const gestureMatch =
        frame.source === "WORKER_GESTURE" &&
        p.kind === "gesture" &&
        p.gestureId === cmd.gesture_id;
      const operatorMatch =
        frame.source === "OPERATOR" &&
        p.kind === "operator" &&
        (cmd.uav === undefined || p.uav === cmd.uav) &&
        (cmd.param === undefined || p.param === cmd.param);
      if (gestureMatch || operatorMatch) {
        p.status = "confirmed";
        return;
      }
    }
  }
}

/**
 * Index of the first log entry whose rendered parameters differ from the
 * previous entry for (uav, key), and the index of the first confirm frame.
 * Used to assert that no parameter change renders before its confirm.
 */
export function firstParamChange(
  log: LogEntry[],
  uav: string,
  key: "beta_deg" | "gamma_deg" | "distance_m",
  tol = 1e-9,
): { changeIndex: number; confirmIndex: number } {
  let changeIndex = -1;
  let confirmIndex = -1;
  let last: number | null = null;
  for (let i = 0; i < log.length; i++) {
    const entry = log[i];
    if (confirmIndex < 0 && entry.frame.type === "confirm") {
      confirmIndex = i;
    }
    const params = entry.paramsAfter;
    if (params && params[uav]) {
      const value = params[uav][key];
      if (last !== null && Math.abs(value - last) > tol && changeIndex < 0) {
        changeIndex = i;
      }
      last = value;
    }
  }
  return { changeIndex, confirmIndex };
}
