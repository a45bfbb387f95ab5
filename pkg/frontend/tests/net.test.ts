import { describe, expect, it } from "vitest";
import { ConsoleClient, type SocketLike } from "../src/net.js";
import { SessionStore } from "../src/store.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  serverSays(frame: unknown): void {
    this.onmessage?.({ data: JSON.stringify(frame) });
  }
}

function makeClient(role: "controller" | "observer" = "controller") {
  const store = new SessionStore();
  const socket = new FakeSocket();
  const client = new ConsoleClient({
    url: "ws://test",
    role,
    store,
    socketFactory: () => socket,
    now: () => 123,
  });
  client.connect();
  socket.onopen?.();
  return { store, socket, client };
}

describe("console client", () => {
  it("sends a versioned hello on open", () => {
    const { socket } = makeClient();
    expect(JSON.parse(socket.sent[0])).toEqual({
      type: "hello",
      protocol: 1,
      role: "controller",
    });
  });

  it("applies server frames into the store", () => {
    const { store, socket } = makeClient();
    socket.serverSays({ type: "hello", protocol: 1, role: "controller", scenario: "s", tick_dt: 0.1, t: 0 });
    expect(store.state.role).toBe("controller");
    expect(store.state.connection).toBe("connected");
  });

  it("turns malformed server payloads into error entries, session intact", () => {
    const { store, socket } = makeClient();
    socket.onmessage?.({ data: "{broken" });
    expect(store.state.errors.length).toBe(1);
    socket.serverSays({ type: "hello", protocol: 1, role: "controller", scenario: "s", tick_dt: 0.1, t: 0 });
    expect(store.state.connection).toBe("connected");
  });

  it("gesture press/release emits on/off frames and one pending entry", () => {
    const { store, socket, client } = makeClient();
    socket.serverSays({ type: "hello", protocol: 1, role: "controller", scenario: "s", tick_dt: 0.1, t: 0 });
    client.sendGesture(4, true);
    client.sendGesture(4, false);
    const frames = socket.sent.slice(1).map((s) => JSON.parse(s));
    expect(frames).toEqual([
      { type: "gesture_inject", id: 4, on: true },
      { type: "gesture_inject", id: 4, on: false },
    ]);
    expect(store.state.pending).toHaveLength(1);
    expect(store.state.pending[0].status).toBe("pending");
  });

  it("marks the session disconnected when the socket drops", () => {
    const { store, socket } = makeClient();
    socket.serverSays({ type: "hello", protocol: 1, role: "controller", scenario: "s", tick_dt: 0.1, t: 0 });
    socket.close();
    expect(store.state.connection).toBe("disconnected");
  });

  it("operator helpers encode delta and absolute requests", () => {
    const { socket, client } = makeClient();
    client.sendOperatorDelta("leader", "beta", 30);
    client.sendOperatorAbsolute("f1", "distance", 12);
    const frames = socket.sent.slice(1).map((s) => JSON.parse(s));
    expect(frames[0]).toEqual({ type: "operator_request", uav: "leader", param: "beta", delta: 30 });
    expect(frames[1]).toEqual({ type: "operator_request", uav: "f1", param: "distance", absolute: 12 });
  });
});
