// DOM + canvas rendering: top-down map with camera rays and separation
// circles, an altitude strip, live gauges and the command history.

import type { MetricRow, UavView } from "./protocol.js";
import { STALE_AFTER_MS, type SessionState, type SessionStore } from "./store.js";

const UAV_COLORS: Record<string, string> = {};
const PALETTE = ["#d62728", "#2ca02c", "#1f77b4", "#9467bd", "#ff7f0e"];

function colorOf(name: string, index: number): string {
  if (!UAV_COLORS[name]) {
    UAV_COLORS[name] = PALETTE[index % PALETTE.length];
  }
  return UAV_COLORS[name];
}

export class Renderer {
  private map: HTMLCanvasElement;
  private strip: HTMLCanvasElement;

  constructor(private root: Document) {
    this.map = root.getElementById("map") as HTMLCanvasElement;
    this.strip = root.getElementById("altitude") as HTMLCanvasElement;
  }

  draw(store: SessionStore, nowMs: number): void {
    const state = store.state;
    this.banner(state, store.isStale(nowMs));
    this.topdown(state);
    this.altitude(state);
    this.gauges(state);
    this.history(state, nowMs);
    const status = this.root.getElementById("status")!;
    status.textContent =
      state.connection === "connected"
        ? `${state.scenario} | role ${state.role} | t=${state.t.toFixed(1)} s`
        : state.connection;
  }

  private banner(state: SessionState, stale: boolean): void {
    const el = this.root.getElementById("banner")!;
    if (state.connection === "disconnected") {
      el.textContent = "disconnected - inputs disabled";
      el.className = "banner error";
    } else if (state.connection === "ended") {
      el.textContent = "mission ended";
      el.className = "banner info";
    } else if (stale) {
      el.textContent = `telemetry stale (> ${STALE_AFTER_MS / 1000} s without frames)`;
      el.className = "banner warn";
    } else {
      el.textContent = "";
      el.className = "banner hidden";
    }
    const disable = state.connection !== "connected" || state.role !== "controller";
    for (const btn of Array.from(this.root.querySelectorAll<HTMLButtonElement>(".needs-control"))) {
      btn.disabled = disable;
    }
  }

  private world2px(state: SessionState): (x: number, y: number) => [number, number] {
    const cfg = state.config!;
    const [x0, y0] = cfg.bounds_min;
    const [x1, y1] = cfg.bounds_max;
    const w = this.map.width;
    const h = this.map.height;
    const sx = w / (x1 - x0);
    const sy = h / (y1 - y0);
    const s = Math.min(sx, sy);
    return (x, y) => [(x - x0) * s, h - (y - y0) * s];
  }

  private topdown(state: SessionState): void {
    const ctx = this.map.getContext("2d")!;
    ctx.clearRect(0, 0, this.map.width, this.map.height);
    if (!state.config || !state.world) {
      return;
    }
    const toPx = this.world2px(state);
    const scale = toPx(1, 0)[0] - toPx(0, 0)[0];

    // obstacle footprints
    ctx.fillStyle = "#555";
    for (const obs of state.config.obstacles) {
      if (obs["type"] === "box") {
        const lo = obs["min"] as number[];
        const hi = obs["max"] as number[];
        const [px, py] = toPx(lo[0], hi[1]);
        ctx.fillRect(px, py, (hi[0] - lo[0]) * scale, (hi[1] - lo[1]) * scale);
      } else if (obs["type"] === "cylinder") {
        const c = obs["center"] as number[];
        const r = (obs["radius"] as number) * scale;
        const [px, py] = toPx(c[0], c[1]);
        ctx.beginPath();
        ctx.arc(px, py, r, 0, Math.PI * 2);
        ctx.fill();
      }
    }

    // worker: true pose and heading tick
    const human = state.world.human;
    const [hx, hy] = toPx(human.p[0], human.p[1]);
    ctx.fillStyle = "#000";
    ctx.beginPath();
    ctx.arc(hx, hy, 6, 0, Math.PI * 2);
    ctx.fill();
    const hh = (human.heading_deg * Math.PI) / 180;
    ctx.strokeStyle = "#000";
    ctx.beginPath();
    ctx.moveTo(hx, hy);
    ctx.lineTo(hx + 14 * Math.cos(hh), hy - 14 * Math.sin(hh));
    ctx.stroke();
    if (human.gesture > 0) {
      ctx.fillStyle = "#0a58ca";
      ctx.font = "12px sans-serif";
      ctx.fillText(`gesture ${human.gesture}`, hx + 8, hy - 8);
    }

    // worker estimate
    if (state.world.estimate) {
      const [ex, ey] = toPx(state.world.estimate.p[0], state.world.estimate.p[1]);
      ctx.strokeStyle = "#0a58ca";
      ctx.beginPath();
      ctx.arc(ex, ey, 5, 0, Math.PI * 2);
      ctx.stroke();
    }

    // vehicles, boresight rays, separation circles
    state.world.uavs.forEach((uav: UavView, i: number) => {
      const color = colorOf(uav.name, i);
      const [ux, uy] = toPx(uav.p[0], uav.p[1]);
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(ux, uy, 5, 0, Math.PI * 2);
      ctx.fill();
      ctx.font = "11px sans-serif";
      ctx.fillText(uav.name, ux + 7, uy + 4);
      // camera ray toward the worker marker
      const heading = (uav.heading_deg * Math.PI) / 180;
      const reach = Math.hypot(hx - ux, hy - uy);
      ctx.strokeStyle = color;
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      ctx.moveTo(ux, uy);
      ctx.lineTo(ux + reach * Math.cos(heading), uy - reach * Math.sin(heading));
      ctx.stroke();
      ctx.setLineDash([]);
      if (state.config) {
        ctx.strokeStyle = color + "55";
        ctx.beginPath();
        ctx.arc(ux, uy, state.config.separation_m * scale, 0, Math.PI * 2);
        ctx.stroke();
      }
    });
  }

  private altitude(state: SessionState): void {
    const ctx = this.strip.getContext("2d")!;
    ctx.clearRect(0, 0, this.strip.width, this.strip.height);
    if (!state.config || !state.world) {
      return;
    }
    const zMax = state.config.bounds_max[2];
    const h = this.strip.height;
    const toY = (z: number) => h - (z / zMax) * h;
    ctx.strokeStyle = "#ccc";
    ctx.beginPath();
    ctx.moveTo(0, toY(0));
    ctx.lineTo(this.strip.width, toY(0));
    ctx.stroke();
    const [hz] = [state.world.human.p[2]];
    ctx.fillStyle = "#000";
    ctx.fillRect(10, toY(hz) - 3, 8, 6);
    ctx.font = "10px sans-serif";
    ctx.fillText("worker", 2, toY(hz) - 6);
    state.world.uavs.forEach((uav, i) => {
      ctx.fillStyle = colorOf(uav.name, i);
      const x = 60 + i * 50;
      ctx.fillRect(x, toY(uav.p[2]) - 3, 8, 6);
      ctx.fillText(`${uav.name} ${uav.p[2].toFixed(1)}m`, x - 6, toY(uav.p[2]) - 6);
    });
  }

  private gauges(state: SessionState): void {
    const el = this.root.getElementById("gauges")!;
    if (!state.params || !state.metrics.length) {
      el.innerHTML = "";
      return;
    }
    const byUav = new Map<string, MetricRow>();
    for (const row of state.metrics) {
      byUav.set(row.uav_id, row);
    }
    const fd = state.gesture ? state.gesture.f_d.toFixed(2) : "-";
    const gf = state.gesture ? state.gesture.g_f : "-";
    let html = `<div class="gauge-head">dominant gesture ${gf} (ratio ${fd})</div>`;
    html += "<table><tr><th></th><th>d_t</th><th>d_o</th><th>d_m</th>" +
      "<th>beta ref/act</th><th>gamma ref/act</th><th>d ref</th></tr>";
    for (const [name, prm] of Object.entries(state.params)) {
      const m = byUav.get(name);
      const num = (v: number | null | undefined, digits = 1) =>
        v === null || v === undefined ? "-" : v.toFixed(digits);
      html += `<tr><td class="uav">${name}</td>` +
        `<td>${num(m?.d_t)}</td><td>${num(m?.d_o)}</td><td>${num(m?.d_m_min)}</td>` +
        `<td>${prm.beta_deg.toFixed(1)} / ${num(m?.beta_act_deg)}</td>` +
        `<td>${prm.gamma_deg.toFixed(1)} / ${num(m?.gamma_act_deg)}</td>` +
        `<td>${prm.distance_m.toFixed(1)}</td></tr>`;
    }
    html += "</table>";
    el.innerHTML = html;
  }

  private history(state: SessionState, nowMs: number): void {
    const el = this.root.getElementById("history")!;
    const rows: string[] = [];
    for (const p of state.pending.slice(-8).reverse()) {
      const age = ((nowMs - p.sentAtMs) / 1000).toFixed(0);
      rows.push(`<li class="${p.status}">${p.label} - ${p.status} (${age}s ago)</li>`);
    }
    for (const h of state.serverHistory.slice(-8).reverse()) {
      const src = h["source"] === "WORKER_GESTURE" ? "worker" : "operator";
      const what = h["gesture_id"] !== undefined
        ? `gesture ${h["gesture_id"]}`
        : `${h["uav"] ?? ""} ${h["param"] ?? ""}`;
      rows.push(`<li class="confirmed">t=${(h["t"] as number).toFixed(1)} ${src}: ${what}</li>`);
    }
    el.innerHTML = rows.join("");
    const errs = this.root.getElementById("errors")!;
    errs.innerHTML = state.errors.slice(-3).map((e) => `<li>${e}</li>`).join("");
  }
}
