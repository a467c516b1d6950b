import init, { compare_plane_source, instability, distribution_heatmap } from "./pkg/suolson_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const PAD = 30;

function lines(canvas, xs, series, { log = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const tf = log ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  const ys = series.flatMap((s) => s.y.map(tf)).filter(Number.isFinite);
  let lo = Math.min(...ys), hi = Math.max(...ys);
  if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => PAD + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * PAD);
  const py = (y) => h - PAD - ((tf(y) - lo) / (hi - lo)) * (h - 2 * PAD);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(PAD, PAD, w - 2 * PAD, h - 2 * PAD);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  const fmt = (v) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(fmt(hi), 2, PAD - 4);
  ctx.fillText(fmt(lo), 2, h - PAD + 14);
  ctx.fillText(String(+x0.toPrecision(3)), PAD, h - 8);
  ctx.fillText(String(+x1.toPrecision(3)), w - PAD - 20, h - 8);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.y.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  }
}

const STOPS = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];
function color(t) {
  const p = Math.min(Math.max(t, 0), 1) * (STOPS.length - 1);
  const i = Math.min(Math.floor(p), STOPS.length - 2), f = p - i;
  return STOPS[i].map((c, k) => Math.round(c + f * (STOPS[i + 1][k] - c)));
}

function heatmap(canvas, values, nx, nmu) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  let lo = Infinity, hi = -Infinity;
  for (const v of values) { if (v < lo) lo = v; if (v > hi) hi = v; }
  const img = ctx.createImageData(w, h);
  for (let py = 0; py < h; py++) {
    const m = Math.min(nmu - 1, Math.floor(((h - 1 - py) * nmu) / h));
    for (let px = 0; px < w; px++) {
      const j = Math.min(nx - 1, Math.floor((px * nx) / w));
      const [r, g, b] = color((values[j * nmu + m] - lo) / (hi - lo || 1));
      const o = 4 * (py * w + px);
      img.data.set([r, g, b, 255], o);
    }
  }
  ctx.putImageData(img, 0, 0);
  return [lo, hi];
}

function guarded(out, f) {
  return () => {
    $(out).textContent = "running...";
    setTimeout(() => {
      try { f(); } catch (e) { $(out).textContent = `error: ${e.message ?? e}`; }
    }, 10);
  };
}

$("ps-run").onclick = guarded("ps-out", () => {
  const t0 = performance.now();
  const r = compare_plane_source(num("ps-nx"), num("ps-nmu"), num("ps-theta"), num("ps-t"));
  lines($("ps-flux"), r.x, [{ y: r.phi_full, color: "#1f77b4" }, { y: r.phi_dlra, color: "#ff7f0e" }]);
  lines($("ps-rank"), r.times, [{ y: r.ranks, color: "#ff7f0e" }]);
  $("ps-out").textContent =
    `scalar flux relative L2 difference ${r.flux_difference.toExponential(2)}\n` +
    `mass drift full ${r.mass_drift_full.toExponential(2)}, low rank ${r.mass_drift_dlra.toExponential(2)}\n` +
    `rank max ${Math.max(...r.ranks)}, final ${r.ranks.at(-1)}   (${(performance.now() - t0).toFixed(0)} ms)`;
});

$("in-run").onclick = guarded("in-out", () => {
  const steps = num("in-steps");
  const r = instability(num("in-k"), steps);
  const xs = Array.from({ length: steps + 1 }, (_, i) => i);
  lines($("in-plot"), xs, [{ y: r.advection, color: "#d62728" }, { y: r.conservative, color: "#2ca02c" }], { log: $("in-log").checked });
  $("in-out").textContent =
    `energy after ${steps} steps: advection form ${r.advection.at(-1).toPrecision(4)}x, ` +
    `conservative ${r.conservative.at(-1).toPrecision(4)}x`;
});

$("hm-run").onclick = guarded("hm-out", () => {
  const m = distribution_heatmap($("hm-solver").value, num("hm-nx"), num("hm-nmu"), num("hm-theta"), num("hm-t"), 64);
  const [lo, hi] = heatmap($("hm-plot"), m.values, m.n_cells, m.n_mu);
  $("hm-out").textContent = `x along the horizontal axis, mu from -1 (bottom) to 1 (top); f in [${lo.toPrecision(3)}, ${hi.toPrecision(3)}], rank ${m.rank}`;
});

await init();
$("ps-run").click();
