// Wire protocol of the simulator's live endpoint: JSON frames over a
// WebSocket, one object per message. Mirrors the server-side schema;
// angles travel in degrees, distances in meters.

export const PROTOCOL_VERSION = 1;

export type Role = "controller" | "observer";

export interface UavView {
  name: string;
  role: "leader" | "follower";
  p: [number, number, number];
  heading_deg: number;
  pitch_deg: number;
}

export interface WorldView {
  human: { p: [number, number, number]; heading_deg: number; gesture: number };
  estimate: { p: [number, number, number]; v: [number, number, number] } | null;
  uavs: UavView[];
}

export interface ParamsView {
  [uav: string]: { beta_deg: number; gamma_deg: number; distance_m: number };
}

export interface GestureView {
  g_d: number;
  g_f: number;
  f_d: number;
}

export interface MetricRow {
  t: number;
  uav_id: string;
  d_t: number;
  d_o: number | null;
  d_m_min: number | null;
  beta_ref_deg: number;
  beta_act_deg: number;
  gamma_ref_deg: number;
  gamma_act_deg: number;
  g_gt: number;
  g_d: number;
  g_f: number;
  f_d: number;
  est_err_m: number | null;
}

export interface SessionConfig {
  bounds_min: [number, number, number];
  bounds_max: [number, number, number];
  obstacles: Array<Record<string, unknown>>;
  separation_m: number;
  uav_names: string[];
  leader: string;
  gesture_ids: number[];
  duration_s: number;
}

export interface HelloFrame {
  type: "hello";
  protocol: number;
  role: Role;
  scenario: string;
  tick_dt: number;
  t: number;
}

export interface SnapshotFrame {
  type: "snapshot";
  protocol: number;
  t: number;
  world: WorldView;
  params: ParamsView;
  gesture: GestureView;
  metrics: MetricRow[];
  history: Array<Record<string, unknown>>;
  config: SessionConfig;
}

export interface DeltaFrame {
  type: "delta";
  t: number;
  world: WorldView;
  params: ParamsView;
  gesture: GestureView;
  metrics: MetricRow[];
}

export interface ConfirmFrame {
  type: "confirm";
  t: number;
  source: "WORKER_GESTURE" | "OPERATOR";
  status: string;
  command: Record<string, unknown>;
}

export interface ErrorFrame {
  type: "error";
  message: string;
}

export interface EndFrame {
  type: "end";
  t: number;
  summary: Record<string, unknown>;
}

export type ServerFrame =
  | HelloFrame
  | SnapshotFrame
  | DeltaFrame
  | ConfirmFrame
  | ErrorFrame
  | EndFrame;

export type ClientFrame =
  | { type: "hello"; protocol: number; role: Role }
  | { type: "gesture_inject"; id: number; on: boolean }
  | {
      type: "operator_request";
      uav: string;
      param: "beta" | "gamma" | "distance";
      delta?: number;
      absolute?: number;
    };

const SERVER_TYPES = new Set(["hello", "snapshot", "delta", "confirm", "error", "end"]);

export function parseServerFrame(payload: string): ServerFrame {
  let obj: unknown;
  try {
    obj = JSON.parse(payload);
  } catch (e) {
    throw new Error(`frame is not valid JSON: ${e}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new Error("frame must be a JSON object");
  }
  const frame = obj as { type?: string; protocol?: number };
  if (!frame.type || !SERVER_TYPES.has(frame.type)) {
    throw new Error(`unknown server frame type ${JSON.stringify(frame.type)}`);
  }
  if (
    (frame.type === "hello" || frame.type === "snapshot") &&
    frame.protocol !== PROTOCOL_VERSION
  ) {
    throw new Error(`protocol mismatch: expected ${PROTOCOL_VERSION}, got ${frame.protocol}`);
  }
  return frame as ServerFrame;
}

export function encodeClientFrame(frame: ClientFrame): string {
  if (frame.type === "operator_request") {
    const hasDelta = frame.delta !== undefined;
    const hasAbs = frame.absolute !== undefined;
    if (hasDelta === hasAbs) {
      throw new Error("operator_request needs exactly one of delta/absolute");
    }
    if (!Number.isFinite(hasDelta ? frame.delta : frame.absolute)) {
      throw new Error("operator_request value must be finite");
    }
  }
  if (frame.type === "gesture_inject" && (!Number.isInteger(frame.id) || frame.id < 0)) {
    throw new Error("gesture id must be a non-negative integer");
  }
  return JSON.stringify(frame);
}

export function helloFrame(role: Role): ClientFrame {
  return { type: "hello", protocol: PROTOCOL_VERSION, role };
}
