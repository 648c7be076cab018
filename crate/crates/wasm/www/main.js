import init, { density_grid, basis_labels, basis_grid, fit_demo } from "./pkg/ttpce_wasm.js";

const BOUNDS = new Float64Array([-4, 4, -3, 3]);
const NX = 160, NY = 120;

const DEFAULT_SPEC = {
  dimension: 2,
  groups: [{
    indices: [0, 1], kind: "mixture", weights: [0.5, 0.5],
    means: [[-2.0, 0.5], [2.0, -0.5]],
    covariances: [[[0.3, 0.15], [0.15, 0.3]], [[0.3, -0.12], [-0.12, 0.3]]],
  }],
};

const $ = (id) => document.getElementById(id);
let selected = [];

function status(msg) {
  $("status").textContent = msg || "";
}

function paint(canvas, values, color) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(NX, NY);
  for (let j = 0; j < NY; j++) {
    for (let i = 0; i < NX; i++) {
      const [r, g, b] = color(values[j * NX + i]);
      // grid rows run upwards in y
      const k = ((NY - 1 - j) * NX + i) * 4;
      img.data[k] = r; img.data[k + 1] = g; img.data[k + 2] = b; img.data[k + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(NX, NY);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function toCanvas(canvas, x, y) {
  return [
    (x - BOUNDS[0]) / (BOUNDS[1] - BOUNDS[0]) * canvas.width,
    (1 - (y - BOUNDS[2]) / (BOUNDS[3] - BOUNDS[2])) * canvas.height,
  ];
}

function drawDensity() {
  const spec = $("spec").value;
  const g = density_grid(spec, BOUNDS, NX, NY);
  const max = Math.max(...g);
  const canvas = $("density");
  paint(canvas, g, (v) => {
    const t = Math.sqrt(v / max);
    return [255 * (1 - t), 255 * (1 - 0.6 * t), 255];
  });
  const ctx = canvas.getContext("2d");
  ctx.fillStyle = "#d40";
  for (const [x, y] of selected) {
    const [cx, cy] = toCanvas(canvas, x, y);
    ctx.beginPath();
    ctx.arc(cx, cy, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function fillBasisMenu() {
  const labels = JSON.parse(basis_labels($("spec").value, Number($("order").value)));
  const menu = $("basis");
  const keep = menu.selectedIndex;
  menu.innerHTML = "";
  labels.forEach((l, k) => {
    const o = document.createElement("option");
    o.value = k;
    o.textContent = `${k}: alpha = (${l.replace(" ", ", ")})`;
    menu.appendChild(o);
  });
  menu.selectedIndex = keep > 0 && keep < labels.length ? keep : Math.min(1, labels.length - 1);
}

function drawSurface() {
  const g = basis_grid($("spec").value, Number($("order").value), Number($("basis").value), BOUNDS, NX, NY);
  const scale = Math.max(...g.map(Math.abs)) || 1;
  paint($("surface"), g, (v) => {
    const t = Math.max(-1, Math.min(1, v / scale));
    return t >= 0 ? [255, 255 * (1 - t), 255 * (1 - t)] : [255 * (1 + t), 255 * (1 + t), 255];
  });
}

function plotCurves(canvas, curves) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const xs = curves.flatMap((c) => c.grid);
  const lo = Math.min(...xs), hi = Math.max(...xs);
  const top = Math.max(...curves.flatMap((c) => c.density)) * 1.05;
  const pad = 8;
  for (const c of curves) {
    ctx.strokeStyle = c.color;
    ctx.lineWidth = c.width;
    ctx.beginPath();
    c.grid.forEach((x, k) => {
      const px = pad + (x - lo) / (hi - lo) * (canvas.width - 2 * pad);
      const py = canvas.height - pad - c.density[k] / top * (canvas.height - 2 * pad);
      k === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    });
    ctx.stroke();
  }
}

function runFit() {
  const r = JSON.parse(fit_demo(
    $("spec").value, Number($("order").value), $("strategy").value,
    Number($("budget").value), Number($("seed").value) >>> 0,
  ));
  selected = r.selected;
  drawDensity();
  plotCurves($("kde"), [
    { ...r.reference, color: "#e80", width: 4 },
    { ...r.surrogate, color: "#000", width: 1.5 },
  ]);
  $("report").textContent = [
    `strategy        ${r.strategy}`,
    `basis size      ${r.n}`,
    `samples used    ${r.m_used}`,
    `support size    ${r.support_size}`,
    `training error  ${r.training_error.toExponential(3)}`,
    `testing error   ${r.test_error.toExponential(3)}`,
    `mean            ${r.mean.toFixed(6)}`,
    `std             ${r.std.toFixed(6)}`,
    `modes           ${r.modes} (direct ${r.reference_modes})`,
    "",
    "m   training error",
    ...r.history.map((h) => `${String(h.m).padEnd(4)}${h.training_error.toExponential(3)}`),
  ].join("\n");
}

function guarded(f) {
  return () => {
    try {
      status("");
      f();
    } catch (e) {
      status(e.message || String(e));
    }
  };
}

await init();
$("spec").value = JSON.stringify(DEFAULT_SPEC, null, 1);
const refresh = guarded(() => { selected = []; drawDensity(); fillBasisMenu(); drawSurface(); });
$("draw").addEventListener("click", refresh);
$("order").addEventListener("change", refresh);
$("basis").addEventListener("change", guarded(drawSurface));
$("fit").addEventListener("click", guarded(runFit));
refresh();
