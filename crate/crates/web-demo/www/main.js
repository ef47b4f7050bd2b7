import init, { weightProfiles, wave1d, collision } from "./pkg/alfven_web_demo.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, x, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const v of s.y) { if (v < lo) lo = v; if (v > hi) hi = v; }
  if (!(hi > lo)) { lo -= 1; hi += 1; }
  const pad = 0.05 * (hi - lo);
  lo -= pad; hi += pad;
  const x0 = x[0], x1 = x[x.length - 1];
  const px = (v) => ((v - x0) / (x1 - x0)) * (w - 60) + 50;
  const py = (v) => h - 20 - ((v - lo) / (hi - lo)) * (h - 30);
  ctx.strokeStyle = "#bbb";
  ctx.fillStyle = "#555";
  ctx.font = "12px system-ui";
  ctx.beginPath();
  ctx.moveTo(50, py(lo)); ctx.lineTo(w - 10, py(lo));
  ctx.moveTo(50, py(lo)); ctx.lineTo(50, py(hi));
  ctx.stroke();
  ctx.fillText(hi.toPrecision(3), 2, py(hi) + 10);
  ctx.fillText(lo.toPrecision(3), 2, py(lo));
  ctx.fillText(x0.toPrecision(3), 50, h - 4);
  ctx.fillText(x1.toPrecision(3), w - 50, h - 4);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.y.forEach((v, i) => (i ? ctx.lineTo(px(x[i]), py(v)) : ctx.moveTo(px(x[i]), py(v))));
    ctx.stroke();
  }
}

function bindSliders(section, redraw) {
  for (const input of document.querySelectorAll(`#${section} input[type=range]`)) {
    const out = input.nextElementSibling;
    const show = () => { out.textContent = input.value; };
    input.addEventListener("input", () => { show(); redraw(); });
    show();
  }
}

function guarded(canvas, f) {
  return () => {
    try { f(); } catch (e) {
      const ctx = canvas.getContext("2d");
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      ctx.fillStyle = "#b00";
      ctx.fillText(String(e), 20, 30);
    }
  };
}

const split = (v, k) => {
  const m = v.length / k;
  return Array.from({ length: k }, (_, i) => v.subarray(i * m, (i + 1) * m));
};

const drawWeights = guarded($("w-plot"), () => {
  const [x, wp, wm] = split(weightProfiles(+$("w-delta").value, +$("w-a").value, +$("w-t").value, 32, 512), 3);
  plot($("w-plot"), x, [{ y: wp, color: "#1f77b4" }, { y: wm, color: "#d62728" }]);
});

const drawWave = guarded($("v-plot"), () => {
  const [x, phi, lbar, l] = split(wave1d(+$("v-a0").value, +$("v-a1").value, +$("v-t").value, 800), 4);
  plot($("v-plot"), x, [{ y: phi, color: "#222" }, { y: lbar, color: "#1f77b4" }, { y: l, color: "#d62728" }]);
});

const runCollision = guarded($("c-plot"), () => {
  const status = $("c-status");
  const started = performance.now();
  const sep = +$("c-sep").value;
  const [t, ep, em, , overlap] = split(collision(+$("c-amp").value, sep, sep + 2), 5);
  const peak = Math.max(...overlap) || 1;
  plot($("c-plot"), t, [
    { y: ep.map((v) => v / ep[0]), color: "#1f77b4" },
    { y: em.map((v) => v / em[0]), color: "#d62728" },
    { y: overlap.map((v) => 1 + (0.5 * v) / peak), color: "#2ca02c" },
  ]);
  status.textContent = `${t.length} samples in ${((performance.now() - started) / 1000).toFixed(1)} s`;
});

await init();
bindSliders("weights", drawWeights);
bindSliders("wave", drawWave);
bindSliders("collision", () => {});
$("c-run").addEventListener("click", () => {
  $("c-status").textContent = "running...";
  setTimeout(runCollision, 10);
});
drawWeights();
drawWave();
