import init, { contour_json, plates_json, piston_json } from "./pkg/cac_wasm.js";

const COLORS = ["#1f5fa8", "#c2410c", "#15803d"];

function field(form, name) {
  return document.querySelector(`#${form} [name=${name}]`);
}

// Minimal line plot: series = [{x, y, label}], optional log-x.
function plot(canvas, series, { logx = false, xlabel = "", ylabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 48;
  ctx.clearRect(0, 0, W, H);
  const tx = (v) => (logx ? Math.log10(v) : v);
  const xs = series.flatMap((s) => s.x.map(tx));
  const ys = series.flatMap((s) => s.y).filter(Number.isFinite);
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(0, ...ys), Math.max(0, ...ys)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const px = (v) => pad + ((tx(v) - x0) / (x1 - x0)) * (W - 2 * pad);
  const py = (v) => H - pad - ((v - y0) / (y1 - y0)) * (H - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(pad, py(0));
  ctx.lineTo(W - pad, py(0));
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, H - pad);
  ctx.stroke();

  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(xlabel + (logx ? "  (log scale)" : ""), W / 2 - 40, H - 12);
  ctx.fillText(ylabel, 6, 16);
  ctx.fillText((logx ? "1e" + x0.toFixed(1) : x0.toPrecision(3)), pad - 10, H - pad + 16);
  ctx.fillText((logx ? "1e" + x1.toFixed(1) : x1.toPrecision(3)), W - pad - 30, H - pad + 16);
  ctx.fillText(y1.toPrecision(3), 4, py(y1) + 4);
  ctx.fillText(y0.toPrecision(3), 4, py(y0) + 4);

  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label, W - pad - 200, pad / 2 + 16 * k + 12);
  });
}

function show(id, html, ok = true) {
  const el = document.getElementById(id);
  el.innerHTML = html;
  el.className = "out " + (ok ? "ok" : "bad");
}

function drawContour() {
  const kind = field("c-form", "kind").value;
  const param = Number(field("c-form", "param").value);
  try {
    const v = JSON.parse(contour_json(kind, param, 200));
    // ω(ξ) traced in the complex plane, parameterized by ξ
    const canvas = document.getElementById("c-plot");
    plot(canvas, [{ x: v.omega_re, y: v.omega_im, label: "ω(ξ), ξ ∈ [1e-3, 1e2]" }], {
      xlabel: "Re ω",
      ylabel: "Im ω",
    });
    const p = v.physicality;
    const w = p.witness ? `\nwitness: ${p.witness.check} at ξ = ${p.witness.xi.toExponential(2)}, ε_c = ${p.witness.eps_re.toPrecision(4)} ${p.witness.eps_im >= 0 ? "+" : "−"} ${Math.abs(p.witness.eps_im).toPrecision(4)}i` : "";
    show(
      "c-out",
      `${v.label}\nconjugate symmetric: ${p.conjugate_symmetric}   passive: ${p.passive}   ` +
        `<b>${p.physical ? "physical medium" : "no physical medium"}</b>${w}`,
      p.physical,
    );
  } catch (e) {
    show("c-out", String(e), false);
  }
}

function drawIntegrand(form, plotId, outId, fn) {
  const kind = field(form, "kind").value;
  const param = Number(field(form, "param").value);
  const res = Number(field(form, "res").value);
  show(outId, "integrating…");
  // let the status paint before the synchronous solve
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const v = JSON.parse(fn(kind, param, res));
      const dt = ((performance.now() - t0) / 1000).toFixed(2);
      const scale = Math.max(...v.integrand.map(Math.abs)) || 1;
      plot(
        document.getElementById(plotId),
        [
          { x: v.xi, y: v.integrand.map((y) => y / scale), label: "Im(ω′ dF/dω), normalized" },
          { x: v.xi, y: v.partial.map((y) => y / v.force), label: "partial integral / F" },
        ],
        { logx: true, xlabel: "ξ (c/d)" },
      );
      const rel = ((v.force - v.reference) / Math.abs(v.reference)) * 100;
      const f = (x) => (x == null ? "–" : x.toPrecision(3));
      show(
        outId,
        `${v.label}, ${v.geometry} at ${v.resolution} cells per d, ${v.xi.length} nodes, ${dt} s\n` +
          `F = ${v.force.toPrecision(5)}   reference ${v.reference.toPrecision(4)} (${rel >= 0 ? "+" : ""}${rel.toFixed(1)}%)   ` +
          `ξ50 = ${f(v.xi50)}   ξ90 = ${f(v.xi90)}   converged: ${v.converged}`,
        v.converged,
      );
    } catch (e) {
      show(outId, String(e), false);
    }
  }, 20);
}

await init();
document.querySelector("#c-form button").addEventListener("click", drawContour);
document
  .querySelector("#p-form button")
  .addEventListener("click", () => drawIntegrand("p-form", "p-plot", "p-out", plates_json));
document
  .querySelector("#s-form button")
  .addEventListener("click", () => drawIntegrand("s-form", "s-plot", "s-out", piston_json));
field("c-form", "kind").addEventListener("change", (ev) => {
  const defaults = { wick: 0, rotation: 0.785398, conductive: 10, saline: 0.3 };
  field("c-form", "param").value = defaults[ev.target.value];
  drawContour();
});
drawContour();
drawIntegrand("p-form", "p-plot", "p-out", plates_json);
