// Console wiring: connect form, press-and-hold gesture buttons, operator
// parameter controls, and the render loop.

import { ConsoleClient } from "./net.js";
import type { Role } from "./protocol.js";
import { Renderer } from "./render.js";
import { SessionStore } from "./store.js";

const store = new SessionStore();
const renderer = new Renderer(document);
let client: ConsoleClient | null = null;

function connect(): void {
  const url = (document.getElementById("url") as HTMLInputElement).value;
  const role = (document.getElementById("role") as HTMLSelectElement).value as Role;
  client?.close();
  client = new ConsoleClient({ url, role, store });
  client.connect();
}

document.getElementById("connect")!.addEventListener("click", connect);

// gesture buttons: pressing performs the gesture, releasing stops it
for (const btn of Array.from(
  document.querySelectorAll<HTMLButtonElement>("button[data-gesture]"),
)) {
  const id = Number(btn.dataset.gesture);
  const start = () => {
    if (client?.isController) {
      client.sendGesture(id, true);
      btn.classList.add("held");
    }
  };
  const stop = () => {
    if (client?.isController && btn.classList.contains("held")) {
      client.sendGesture(id, false);
      btn.classList.remove("held");
    }
  };
  btn.addEventListener("mousedown", start);
  btn.addEventListener("touchstart", start);
  btn.addEventListener("mouseup", stop);
  btn.addEventListener("mouseleave", stop);
  btn.addEventListener("touchend", stop);
}

function operatorTargets(): { uav: string; param: "beta" | "gamma" | "distance" } {
  const uav = (document.getElementById("op-uav") as HTMLSelectElement).value;
  const param = (document.getElementById("op-param") as HTMLSelectElement).value as
    | "beta"
    | "gamma"
    | "distance";
  return { uav, param };
}

document.getElementById("op-minus")!.addEventListener("click", () => {
  const { uav, param } = operatorTargets();
  const step = param === "distance" ? -1.0 : param === "gamma" ? -5.0 : -30.0;
  client?.sendOperatorDelta(uav, param, step);
});
document.getElementById("op-plus")!.addEventListener("click", () => {
  const { uav, param } = operatorTargets();
  const step = param === "distance" ? 1.0 : param === "gamma" ? 5.0 : 30.0;
  client?.sendOperatorDelta(uav, param, step);
});
document.getElementById("op-send")!.addEventListener("click", () => {
  const { uav, param } = operatorTargets();
  const value = Number((document.getElementById("op-value") as HTMLInputElement).value);
  if (Number.isFinite(value)) {
    client?.sendOperatorAbsolute(uav, param, value);
  }
});

// roster select follows the session config
function refreshRoster(): void {
  const sel = document.getElementById("op-uav") as HTMLSelectElement;
  const names = store.state.config?.uav_names ?? [];
  if (names.length && sel.options.length !== names.length) {
    sel.innerHTML = names.map((n) => `<option value="${n}">${n}</option>`).join("");
  }
}

function tick(): void {
  refreshRoster();
  renderer.draw(store, Date.now());
  requestAnimationFrame(tick);
}

requestAnimationFrame(tick);
