import init, { Minimizer, Diagram, saddle_gradient, saddle_image, saddle_width } from "./pkg/widthtopo_web.js";

const $ = (id) => document.getElementById(id);

function paint(canvas, values, width, scale, color) {
  const height = values.length / width;
  canvas.width = width;
  canvas.height = height;
  canvas.style.width = `${width * scale}px`;
  canvas.style.height = `${height * scale}px`;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(width, height);
  values.forEach((v, i) => {
    const [r, g, b] = color(v);
    img.data.set([r, g, b, 255], 4 * i);
  });
  ctx.putImageData(img, 0, 0);
}

const gray = (v) => { const c = Math.round(255 * Math.min(1, Math.max(0, v))); return [c, c, c]; };
const binary = (t) => (v) => (v >= t ? [30, 30, 30] : [240, 240, 240]);

// direct minimization
let minimizer = null;
let running = false;

function resetMinimizer() {
  running = false;
  minimizer = new Minimizer($("m-variant").value, Number($("m-eps").value), Number($("m-radius").value));
  drawMinimizer(0);
}

function drawMinimizer(energy) {
  const px = minimizer.pixels();
  const w = minimizer.width();
  paint($("m-canvas"), px, w, 8, gray);
  paint($("m-binary"), px, w, 8, binary(0.5));
  $("m-stat").textContent =
    `iteration      ${minimizer.iterations()}\n` +
    `energy         ${energy.toFixed(4)}\n` +
    `components     ${minimizer.components()}\n` +
    `after erosion  ${minimizer.components_after_erosion()}\n` +
    `target met     ${minimizer.target_met()}`;
}

function runToTarget() {
  running = true;
  let streak = 0;
  const tick = () => {
    if (!running) return;
    const e = minimizer.step(1);
    drawMinimizer(e);
    streak = minimizer.target_met() ? streak + 1 : 0;
    if (streak < 10 && minimizer.iterations() < 500) requestAnimationFrame(tick);
    else running = false;
  };
  tick();
}

// gradient explorer
function drawGradient() {
  const eps = Number($("g-eps").value);
  const r = Number($("g-radius").value);
  $("g-eps-v").textContent = eps === 0 ? "0 (plain)" : eps.toFixed(3);
  $("g-radius-v").textContent = r;
  const w = saddle_width();
  paint($("g-image"), saddle_image(), w, 12, gray);
  const g = saddle_gradient(eps, r);
  const peak = g.reduce((m, v) => Math.max(m, Math.abs(v)), 0) || 1;
  paint($("g-canvas"), g, w, 12, (v) => {
    const a = Math.abs(v) / peak;
    return v >= 0 ? [255, 255 * (1 - a), 255 * (1 - a)] : [255 * (1 - a), 255 * (1 - a), 255];
  });
}

// diagram and Betti slider
let diagram = null;

function loadDiagram() {
  diagram = new Diagram($("d-image").value);
  drawDiagram();
}

function drawDiagram() {
  const t = Number($("d-t").value);
  $("d-t-v").textContent = t.toFixed(3);
  paint($("d-field"), diagram.pixels(), diagram.width(), 12, binary(t));

  const ctx = $("d-plot").getContext("2d");
  const size = 260, pad = 20, span = size - 2 * pad;
  const at = (v) => pad + span * v;
  ctx.clearRect(0, 0, size, size);
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(at(0), size - at(0));
  ctx.lineTo(at(1), size - at(1));
  ctx.stroke();
  // the threshold: alive pairs lie in the box birth >= t > death
  ctx.fillStyle = "rgba(80, 140, 255, 0.12)";
  ctx.fillRect(at(0), size - at(1), at(t) - at(0), at(1) - at(t));

  const pairs = diagram.pairs();
  for (let i = 0; i < pairs.length; i += 3) {
    const [dim, birth, death] = [pairs[i], pairs[i + 1], pairs[i + 2]];
    const x = at(Math.max(death, 0)), y = size - at(birth);
    ctx.fillStyle = dim === 0 ? "#d33" : "#36c";
    ctx.beginPath();
    if (death < 0) ctx.rect(x - 4, y - 4, 8, 8);
    else ctx.arc(x, y, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  const [b0, b1] = diagram.betti(t);
  $("d-stat").textContent =
    `x: death, y: birth\nred: components, blue: holes\nsquare: never dies\n\nbeta0 ${b0}\nbeta1 ${b1}`;
}

await init();
$("m-reset").onclick = resetMinimizer;
$("m-variant").onchange = resetMinimizer;
$("m-step").onclick = () => { running = false; drawMinimizer(minimizer.step(10)); };
$("m-run").onclick = runToTarget;
$("g-eps").oninput = drawGradient;
$("g-radius").oninput = drawGradient;
$("d-image").onchange = loadDiagram;
$("d-t").oninput = drawDiagram;
resetMinimizer();
drawGradient();
loadDiagram();
