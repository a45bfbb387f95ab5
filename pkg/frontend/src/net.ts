// Duplex client for the simulator endpoint. The WebSocket constructor is
// injectable so the same client runs in the browser and under node tests.

import {
  encodeClientFrame,
  helloFrame,
  parseServerFrame,
  type ClientFrame,
  type Role,
  type ServerFrame,
} from "./protocol.js";
import { SessionStore } from "./store.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  url: string;
  role: Role;
  store: SessionStore;
  socketFactory?: SocketFactory;
  now?: () => number;
  onFrame?: (frame: ServerFrame) => void;
  onClose?: () => void;
}

export class ConsoleClient {
  private ws: SocketLike | null = null;
  private readonly opts: ClientOptions;
  private readonly now: () => number;
  closedByUser = false;

  constructor(opts: ClientOptions) {
    this.opts = opts;
    this.now = opts.now ?? (() => Date.now());
  }

  connect(): void {
    const factory =
      this.opts.socketFactory ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike);
    this.closedByUser = false;
    this.opts.store.connecting();
    const ws = factory(this.opts.url);
    this.ws = ws;
    ws.onopen = () => {
      ws.send(encodeClientFrame(helloFrame(this.opts.role)));
    };
    ws.onmessage = (ev) => {
      let frame: ServerFrame;
      try {
        frame = parseServerFrame(String(ev.data));
      } catch (e) {
        this.opts.store.apply({ type: "error", message: String(e) }, this.now());
        return;
      }
      this.opts.store.apply(frame, this.now());
      this.opts.onFrame?.(frame);
    };
    ws.onclose = () => {
      if (this.opts.store.state.connection !== "ended") {
        this.opts.store.disconnected();
      }
      this.opts.onClose?.();
    };
    ws.onerror = () => {
      // onclose follows; nothing else to do
    };
  }

  close(): void {
    this.closedByUser = true;
    this.ws?.close();
  }

  get isController(): boolean {
    return this.opts.store.state.role === "controller";
  }

  private send(frame: ClientFrame): void {
    if (!this.ws) {
      throw new Error("not connected");
    }
    this.ws.send(encodeClientFrame(frame));
  }

  sendGesture(id: number, on: boolean): void {
    this.send({ type: "gesture_inject", id, on });
    if (on) {
      this.opts.store.commandSent({
        kind: "gesture",
        label: `gesture ${id}`,
        sentAtMs: this.now(),
        gestureId: id,
      });
    }
  }

  sendOperatorDelta(uav: string, param: "beta" | "gamma" | "distance", delta: number): void {
    this.send({ type: "operator_request", uav, param, delta });
    this.opts.store.commandSent({
      kind: "operator",
      label: `${uav} ${param} ${delta >= 0 ? "+" : ""}${delta}`,
      sentAtMs: this.now(),
      uav,
      param,
    });
  }

  sendOperatorAbsolute(uav: string, param: "beta" | "gamma" | "distance", value: number): void {
    this.send({ type: "operator_request", uav, param, absolute: value });
    this.opts.store.commandSent({
      kind: "operator",
      label: `${uav} ${param} = ${value}`,
      sentAtMs: this.now(),
      uav,
      param,
    });
  }
}
