// Console wiring: stream -> view model -> canvas, operator widgets ->
// protocol commands.  Configuration via URL query: ?host=...&port=...

import { StreamClient } from "./client.js";
import { makeTransform, renderScene } from "./render.js";
import {
  ViewModel,
  addPending,
  applyMessage,
  initialViewModel,
  markTick,
  onConnect,
  onDisconnect,
} from "./viewmodel.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? "127.0.0.1";
const port = params.get("port") ?? "8787";
const url = `ws://${host}:${port}`;

let vm: ViewModel = initialViewModel();

const canvas = document.getElementById("map") as HTMLCanvasElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const gauges = document.getElementById("gauges") as HTMLDivElement;
const wrenchCanvas = document.getElementById("wrench") as HTMLCanvasElement;
const modeLabel = document.getElementById("mode") as HTMLSpanElement;
const slider = document.getElementById("pulse") as HTMLInputElement;
const sliderValue = document.getElementById("pulse-value") as HTMLSpanElement;

const client = new StreamClient(url, true, {
  onMessage(msg) {
    vm = applyMessage(vm, msg, performance.now());
  },
  onOpen() {
    vm = onConnect(vm);
    banner.textContent = `connected to ${url}`;
    banner.className = "ok";
  },
  onClose() {
    vm = onDisconnect(vm);
    banner.textContent = "disconnected - retrying";
    banner.className = "error";
  },
  onDecodeError(err) {
    banner.textContent = `decode failure: ${err.message} (resubscribing)`;
    banner.className = "error";
  },
});
client.connect();

canvas.addEventListener("click", (event) => {
  if (!vm.map) return;
  const rect = canvas.getBoundingClientRect();
  const transform = makeTransform(vm.map, canvas.width, canvas.height);
  const point = transform.toMap(
    ((event.clientX - rect.left) / rect.width) * canvas.width,
    ((event.clientY - rect.top) / rect.height) * canvas.height,
  );
  try {
    const id = client.send({ action: "SET_GOAL", pe: point.pe, se: point.se });
    vm = addPending(vm, id, "SET_GOAL", performance.now());
  } catch {
    banner.textContent = "not connected";
  }
});

slider.addEventListener("input", () => {
  sliderValue.textContent = `${Number(slider.value).toFixed(1)} N m`;
});
slider.addEventListener("change", () => {
  const magnitude = Number(slider.value);
  if (magnitude === 0) return;
  try {
    const id = client.send({
      action: "INJECT_ACTIVATION",
      kind: "torque",
      axis: 2,
      magnitude,
      duration: 1.5,
    });
    vm = addPending(vm, id, "INJECT_ACTIVATION", performance.now());
  } catch {
    banner.textContent = "not connected";
  }
  slider.value = "0";
  sliderValue.textContent = "0.0 N m";
});

for (const [buttonId, action] of [
  ["pause", "PAUSE"],
  ["resume", "RESUME"],
] as const) {
  document.getElementById(buttonId)?.addEventListener("click", () => {
    try {
      const id = client.send({ action });
      vm = addPending(vm, id, action, performance.now());
    } catch {
      banner.textContent = "not connected";
    }
  });
}
document.getElementById("subject-mode")?.addEventListener("change", (ev) => {
  const mode = (ev.target as HTMLSelectElement).value;
  try {
    const id = client.send({ action: "MODE", mode });
    vm = addPending(vm, id, "MODE", performance.now());
  } catch {
    banner.textContent = "not connected";
  }
});

function renderGauges(): void {
  const entries = Object.entries(vm.activations);
  gauges.innerHTML = entries
    .map(([name, value]) => {
      const pct = Math.min(Math.max(value, 0), 1) * 100;
      return (
        `<div class="gauge"><label>${name}</label>` +
        `<div class="bar"><div class="fill" style="width:${pct}%"></div></div>` +
        `<span>${value.toFixed(3)}</span></div>`
      );
    })
    .join("");
}

function renderWrench(): void {
  const ctx = wrenchCanvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = wrenchCanvas;
  ctx.clearRect(0, 0, width, height);
  const trace = vm.wrenchTrace;
  if (trace.length < 2) return;
  const max = Math.max(...trace.map((p) => p.magnitude), 1);
  ctx.strokeStyle = "#d08030";
  ctx.beginPath();
  trace.forEach((p, i) => {
    const x = (i / (trace.length - 1)) * width;
    const y = height - (p.magnitude / max) * (height - 4) - 2;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.fillText(`|f| ${trace[trace.length - 1].magnitude.toFixed(1)} N`, 6, 12);
}

function frame(): void {
  vm = markTick(vm, performance.now());
  renderScene(canvas, vm);
  renderGauges();
  renderWrench();
  modeLabel.textContent =
    `${vm.mode}${vm.paused ? " (paused)" : ""}` +
    `${vm.stale ? " - STALE" : ""}` +
    `${vm.pending.length ? ` - ${vm.pending.length} pending` : ""}` +
    ` - sigma ${vm.sigma.toFixed(2)}%`;
  if (vm.lastError) {
    banner.textContent = vm.lastError;
    banner.className = "error";
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
