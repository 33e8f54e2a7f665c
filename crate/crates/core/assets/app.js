"use strict";

// Ladder defaults; level 0 is the best rung. Sizes in bytes.
const LADDER = [
  { width: 1280, height: 720, quality: 90, expected: 240000 },
  { width: 960, height: 540, quality: 65, expected: 55000 },
  { width: 640, height: 360, quality: 35, expected: 20000 },
  { width: 320, height: 180, quality: 10, expected: 7000 },
];
const BASE = { width: 1280, height: 720, fovDeg: 60 };
const PANNING_DEG = 5;
const MIN_EXPECTED = 1024;
const ELEVATION_LIMIT = Math.PI / 2 - 1e-4;

// Mirror of the server-side latency controller. Checked against
// /static/abr_conformance.json by replayConformance().
class LatencyAbr {
  constructor(ladder, initialLevel, cfg = {}) {
    this.ladder = ladder.map((r) => ({ ...r }));
    this.level = initialLevel;
    this.tTarget = cfg.tTarget ?? 0.1;
    this.tMargin = cfg.tMargin ?? 0.15;
    this.hold = 3;
    this.overNeeded = 2;
    this.alpha = 0.3;
    this.ema = null;
    this.pending = null;
    this.holdCounter = 0;
    this.overMargin = 0;
  }

  predict(level, rate) {
    return this.ladder[level].expected / rate;
  }

  onResponse(sizeBytes, duration, requestTime, panning) {
    if (sizeBytes > 0 && duration > 0) {
      const rate = sizeBytes / duration;
      this.ema = this.ema === null ? rate : this.alpha * rate + (1 - this.alpha) * this.ema;
      const r = this.ladder[this.level];
      r.expected = Math.max(0.8 * r.expected + 0.2 * sizeBytes, MIN_EXPECTED);
    }
    return this.decide(requestTime, panning);
  }

  decide(requestTime, panning) {
    const worst = this.ladder.length - 1;
    const level = this.level;
    this.overMargin = requestTime > this.tMargin ? this.overMargin + 1 : 0;
    const downgrade = level < worst && this.overMargin >= this.overNeeded;
    let candidate = null;
    if (downgrade) {
      candidate = level + 1;
    } else if (level > 0 && this.ema !== null && this.predict(level - 1, this.ema) <= this.tTarget) {
      candidate = level - 1;
    }
    if (candidate === null) {
      this.pending = null;
      this.holdCounter = 0;
      return this.level;
    }
    if (downgrade && panning) {
      let to = worst;
      if (this.ema !== null) {
        for (let l = level + 1; l <= worst; l++) {
          if (this.predict(l, this.ema) <= this.tTarget) {
            to = l;
            break;
          }
        }
      }
      return this.switchTo(to);
    }
    if (this.pending === candidate) {
      this.holdCounter += 1;
    } else {
      this.pending = candidate;
      this.holdCounter = 1;
    }
    return this.holdCounter >= this.hold ? this.switchTo(candidate) : this.level;
  }

  switchTo(level) {
    this.level = level;
    this.pending = null;
    this.holdCounter = 0;
    this.overMargin = 0;
    return level;
  }
}

async function replayConformance() {
  const traces = await (await fetch("/static/abr_conformance.json")).json();
  const failures = [];
  for (const t of traces) {
    const ladder = t.ladder.map((r) => ({ ...r, expected: r.expected_kb * 1000 }));
    const abr = new LatencyAbr(ladder, t.initial_level, { tTarget: t.t_target, tMargin: t.t_margin });
    const got = t.samples.map((s) => abr.onResponse(s.size_bytes, s.duration_s, s.duration_s, s.panning));
    if (JSON.stringify(got) !== JSON.stringify(t.expected_levels)) failures.push(t.name);
  }
  return failures;
}
window.replayConformance = replayConformance;

const $ = (id) => document.getElementById(id);

function baseIntrinsics() {
  const fx = BASE.width / 2 / Math.tan((BASE.fovDeg * Math.PI) / 360);
  return { fx, fy: fx, cx: BASE.width / 2, cy: BASE.height / 2 };
}

const session = {
  modelId: null,
  pose: { az: 0, el: 0, t: [0, 0, -4] },
  intrinsics: baseIntrinsics(),
  abr: new LatencyAbr(LADDER, LADDER.length - 1),
  manualLevel: LADDER.length - 1,
  frameId: 0,
  shownFrame: 0,
  inFlight: false,
  dirty: true,
  lastAngles: null,
  lastLatencyMs: 0,
  switches: 0,
  objectUrl: null,
  recorder: null,
};

function showBanner(text) {
  const b = $("banner");
  b.textContent = text;
  b.hidden = !text;
}

async function loadDashboard() {
  try {
    const res = await fetch("/models");
    if (!res.ok) throw new Error(`HTTP ${res.status}`);
    const models = await res.json();
    showBanner("");
    const grid = $("models");
    grid.replaceChildren();
    for (const m of models) grid.append(modelCard(m));
  } catch (e) {
    showBanner(`Server unavailable (${e.message}); retrying`);
    setTimeout(loadDashboard, 3000);
  }
}

function modelCard(m) {
  const card = document.createElement("div");
  card.className = "card";
  let thumb;
  if (m.preview_url) {
    thumb = document.createElement("img");
    thumb.src = m.preview_url;
    thumb.alt = m.name;
  } else {
    thumb = document.createElement("div");
    thumb.className = "thumb";
  }
  const name = document.createElement("div");
  name.textContent = m.name;
  const state = document.createElement("div");
  state.className = `state ${m.state}`;
  state.textContent = m.state;
  card.append(thumb, name, state);
  card.addEventListener("click", async () => {
    state.textContent = "Loading";
    state.className = "state Loading";
    const res = await fetch(`/models/${encodeURIComponent(m.id)}/load`, { method: "POST" }).catch(() => null);
    if (!res || !res.ok) {
      const body = res ? await res.json().catch(() => ({})) : {};
      state.textContent = body.error ?? "load failed";
      state.className = "state";
      return;
    }
    state.textContent = "Loaded";
    state.className = "state Loaded";
    openViewer(m);
  });
  return card;
}

function openViewer(m) {
  session.modelId = m.id;
  session.dirty = true;
  $("model-name").textContent = m.name;
  $("dashboard").hidden = true;
  $("viewer").hidden = false;
}

function closeViewer() {
  session.modelId = null;
  $("viewer").hidden = true;
  $("dashboard").hidden = false;
  loadDashboard();
}

const keys = new Set();
window.addEventListener("keydown", (e) => {
  if (e.target instanceof HTMLInputElement) return;
  keys.add(e.code);
  if (e.code.startsWith("Arrow") || e.code === "Space") e.preventDefault();
});
window.addEventListener("keyup", (e) => keys.delete(e.code));

// Same semantics as the server-side camera helper: planar moves follow the azimuth.
function applyInput() {
  const step = Number($("move-step").value) || 0.05;
  const turn = ((Number($("turn-step").value) || 1.5) * Math.PI) / 180;
  const p = session.pose;
  const s = Math.sin(p.az);
  const c = Math.cos(p.az);
  let moved = false;
  const on = (code, fn) => {
    if (keys.has(code)) {
      fn();
      moved = true;
    }
  };
  on("KeyW", () => { p.t[0] += step * s; p.t[2] += step * c; });
  on("KeyS", () => { p.t[0] -= step * s; p.t[2] -= step * c; });
  on("KeyD", () => { p.t[0] += step * c; p.t[2] -= step * s; });
  on("KeyA", () => { p.t[0] -= step * c; p.t[2] += step * s; });
  on("Space", () => { p.t[1] -= step; });
  on("ShiftLeft", () => { p.t[1] += step; });
  on("ArrowLeft", () => { p.az -= turn; });
  on("ArrowRight", () => { p.az += turn; });
  on("ArrowUp", () => { p.el = Math.max(-ELEVATION_LIMIT, p.el - turn); });
  on("ArrowDown", () => { p.el = Math.min(ELEVATION_LIMIT, p.el + turn); });
  if (moved) session.dirty = true;
}

function isPanning(azDeg, elDeg) {
  const prev = session.lastAngles;
  session.lastAngles = [azDeg, elDeg];
  if (!prev) return false;
  let daz = (((azDeg - prev[0]) % 360) + 360) % 360;
  if (daz > 180) daz = 360 - daz;
  return daz + Math.abs(elDeg - prev[1]) > PANNING_DEG;
}

function currentLevel() {
  return $("abr-on").checked ? session.abr.level : session.manualLevel;
}

function buildRequest(level) {
  const rung = LADDER[level];
  const k = session.intrinsics;
  const sx = rung.width / BASE.width;
  const sy = rung.height / BASE.height;
  const p = session.pose;
  session.frameId += 1;
  return {
    model_id: session.modelId,
    azimuth: (p.az * 180) / Math.PI,
    elevation: (p.el * 180) / Math.PI,
    translation: [...p.t],
    fx: k.fx * sx,
    fy: k.fy * sy,
    cx: k.cx * sx,
    cy: k.cy * sy,
    width: rung.width,
    height: rung.height,
    jpeg_quality: rung.quality,
    frame_id: session.frameId,
  };
}

// At most one request in flight; poses changed meanwhile collapse into the next one.
async function requestFrame() {
  if (!session.modelId || session.inFlight || !session.dirty) return;
  session.dirty = false;
  session.inFlight = true;
  const level = currentLevel();
  const req = buildRequest(level);
  const panning = isPanning(req.azimuth, req.elevation);
  const t0 = performance.now();
  try {
    const res = await fetch("/render", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    const blob = await res.blob();
    const elapsed = (performance.now() - t0) / 1000;
    if (!res.ok) {
      let msg = `HTTP ${res.status}`;
      try {
        msg = JSON.parse(await blob.text()).error ?? msg;
      } catch (_) { /* non-JSON error body */ }
      showViewportError(msg);
      record(req, level, t0, 0, res.status, msg, panning);
      return;
    }
    const size = Number(res.headers.get("content-length")) || blob.size;
    if (req.frame_id > session.shownFrame) {
      session.shownFrame = req.frame_id;
      swapImage(blob);
    }
    session.lastLatencyMs = elapsed * 1000;
    const before = session.abr.level;
    session.abr.onResponse(size, elapsed, elapsed, panning);
    if (session.abr.level !== before) session.switches += 1;
    record(req, level, t0, size, res.status, "", panning, res.headers.get("x-render-ms"));
    updateStats(level);
  } catch (e) {
    showViewportError(e.message);
  } finally {
    session.inFlight = false;
  }
}

function swapImage(blob) {
  const url = URL.createObjectURL(blob);
  const img = $("frame");
  img.onerror = () => URL.revokeObjectURL(url);
  img.src = url;
  if (session.objectUrl) URL.revokeObjectURL(session.objectUrl);
  session.objectUrl = url;
  $("overlay-error").hidden = true;
}

function showViewportError(msg) {
  const el = $("overlay-error");
  el.textContent = msg;
  el.hidden = false;
}

function updateStats(level) {
  const el = $("stats");
  el.hidden = !$("stats-on").checked;
  const ema = session.abr.ema === null ? 0 : (session.abr.ema * 8) / 1e6;
  const r = LADDER[level];
  el.textContent =
    `level ${level} (${r.width}x${r.height} q${r.quality})\n` +
    `ema ${ema.toFixed(2)} Mbps\n` +
    `latency ${session.lastLatencyMs.toFixed(1)} ms\n` +
    `switches ${session.switches}`;
}

function loop() {
  applyInput();
  requestFrame();
  requestAnimationFrame(loop);
}

// Experiment replays drive the same viewport path and export the harness CSV schema.
const CSV_HEADER =
  "frame_id,t_send,t_recv,azimuth_deg,elevation_deg,tx,ty,tz,level,width,height,jpeg_quality,bytes,render_ms,ema_bps,panning,status,error";

function record(req, level, t0, bytes, status, error, panning, renderMs) {
  const rec = session.recorder;
  if (!rec) return;
  const now = performance.now();
  rec.rows.push([
    req.frame_id,
    ((t0 - rec.start) / 1000).toFixed(6),
    ((now - rec.start) / 1000).toFixed(6),
    req.azimuth, req.elevation, ...req.translation,
    level, req.width, req.height, req.jpeg_quality, bytes,
    renderMs ?? "", session.abr.ema ?? "", panning, status, JSON.stringify(error),
  ].join(","));
}

function parseTrace(text) {
  const lines = text.trim().split(/\r?\n/);
  const header = lines.shift()?.split(",").map((s) => s.trim());
  const want = ["t_ms", "azimuth_deg", "elevation_deg", "tx", "ty", "tz"];
  if (!header || want.some((h, i) => header[i] !== h)) throw new Error(`header must be ${want.join(",")}`);
  return lines.map((line, i) => {
    const v = line.split(",").map(Number);
    if (v.length !== 6 || v.some((x) => !Number.isFinite(x))) throw new Error(`line ${i + 2}: bad row`);
    return v;
  });
}

async function runExperiment() {
  const status = $("experiment-status");
  let entries;
  try {
    const res = await fetch($("trace-url").value);
    if (!res.ok) throw new Error(`HTTP ${res.status}`);
    entries = parseTrace(await res.text());
  } catch (e) {
    status.textContent = `Invalid trace: ${e.message}`;
    return;
  }
  const runs = Math.max(1, Number($("runs").value) || 1);
  for (let run = 0; run < runs; run++) {
    session.recorder = { start: performance.now(), rows: [], cancelled: false };
    const rec = session.recorder;
    for (const [tMs, az, el, tx, ty, tz] of entries) {
      if (rec.cancelled) break;
      const wait = rec.start + tMs - performance.now();
      if (wait > 0) await new Promise((r) => setTimeout(r, wait));
      while (session.inFlight) await new Promise((r) => setTimeout(r, 1));
      session.pose = { az: (az * Math.PI) / 180, el: (el * Math.PI) / 180, t: [tx, ty, tz] };
      session.dirty = true;
      await requestFrame();
      status.textContent = `run ${run + 1}/${runs}: ${rec.rows.length}/${entries.length}`;
    }
    download(rec, run);
  }
  session.recorder = null;
}

function download(rec, run) {
  const suffix = rec.cancelled ? "_partial" : "";
  const blob = new Blob([CSV_HEADER + "\n" + rec.rows.join("\n") + "\n"], { type: "text/csv" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = `frames_run${run + 1}${suffix}.csv`;
  a.click();
  URL.revokeObjectURL(a.href);
}

function init() {
  const level = $("level");
  LADDER.forEach((r, i) => level.add(new Option(`${i}: ${r.width}x${r.height} q${r.quality}`, i)));
  level.value = session.manualLevel;
  level.disabled = true;
  level.addEventListener("change", () => {
    session.manualLevel = Number(level.value);
    session.dirty = true;
  });
  $("abr-on").addEventListener("change", (e) => {
    level.disabled = e.target.checked;
    session.dirty = true;
  });
  for (const k of ["fx", "fy", "cx", "cy"]) {
    const input = $(k);
    input.value = session.intrinsics[k].toFixed(2);
    input.addEventListener("change", () => {
      const v = Number(input.value);
      if (Number.isFinite(v)) session.intrinsics[k] = v;
      session.dirty = true;
    });
  }
  $("stats-on").addEventListener("change", () => updateStats(currentLevel()));
  $("back").addEventListener("click", closeViewer);
  $("experiment-open").addEventListener("click", () => $("experiment").showModal());
  $("experiment-start").addEventListener("click", (e) => {
    e.preventDefault();
    runExperiment();
  });
  $("experiment-cancel").addEventListener("click", () => {
    if (session.recorder) session.recorder.cancelled = true;
  });
  loadDashboard();
  requestAnimationFrame(loop);
}

document.addEventListener("DOMContentLoaded", init);
