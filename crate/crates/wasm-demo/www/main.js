import init, { alpha0, margin_curve, pair_count, Simulation } from "./pkg/fnls_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function plot(canvas, series, colors) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = series.flat();
  let lo = Math.min(...all, 0);
  let hi = Math.max(...all, 0);
  if (hi === lo) hi = lo + 1;
  const y = (v) => h - 10 - ((v - lo) / (hi - lo)) * (h - 20);
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(0, y(0));
  ctx.lineTo(w, y(0));
  ctx.stroke();
  series.forEach((s, i) => {
    ctx.strokeStyle = colors[i];
    ctx.beginPath();
    s.forEach((v, j) => {
      const x = (j / Math.max(s.length - 1, 1)) * w;
      j === 0 ? ctx.moveTo(x, y(v)) : ctx.lineTo(x, y(v));
    });
    ctx.stroke();
  });
}

function margin() {
  const curve = Array.from(margin_curve(num("m-lo"), num("m-hi"), 400));
  $("m-out").textContent = `alpha0 = ${alpha0().toFixed(12)}`;
  plot($("m-plot"), [curve], ["#1f5fbf"]);
}

function simulate() {
  $("s-out").textContent = "running...";
  setTimeout(() => {
    try {
      const sim = new Simulation(BigInt(num("s-seed")), num("s-alpha"), num("s-n"), num("s-t"), num("s-dt"), 256);
      const m = Array.from(sim.mass_drift());
      const e = Array.from(sim.energy_drift());
      const worst = (a) => Math.max(...a.map(Math.abs)).toExponential(2);
      $("s-out").textContent = `max relative drift: mass ${worst(m)}, energy ${worst(e)}\n|u(0,x)| blue, |u(T,x)| red`;
      plot($("s-plot"), [Array.from(sim.initial_profile()), Array.from(sim.final_profile())], ["#1f5fbf", "#c0392b"]);
      sim.free();
    } catch (err) {
      $("s-out").textContent = String(err);
    }
  });
}

function count() {
  try {
    const [c, bound] = pair_count(num("p-a"), num("p-l"), num("p-m1"), num("p-m2"), num("p-r"), num("p-alpha"));
    $("p-out").textContent = `count ${c}, bound ${bound.toFixed(3)}, ratio ${(c / bound).toFixed(3)}`;
  } catch (err) {
    $("p-out").textContent = String(err);
  }
}

await init();
$("m-run").onclick = margin;
$("s-run").onclick = simulate;
$("p-run").onclick = count;
margin();
count();
