import init, { choice_probabilities, interest_trajectory, latent_bandit_ctr } from "./pkg/slatesim_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function bars(canvas, labels, values, max) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const slot = width / values.length;
  ctx.font = "12px system-ui";
  values.forEach((v, i) => {
    const h = (height - 40) * (v / max);
    ctx.fillStyle = "#4a7bd0";
    ctx.fillRect(i * slot + 10, height - 20 - h, slot - 20, h);
    ctx.fillStyle = "#222";
    ctx.fillText(labels[i], i * slot + 10, height - 5);
    ctx.fillText(v.toFixed(3), i * slot + 10, height - 25 - h);
  });
}

function line(canvas, series, colors, ranges) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  series.forEach((ys, s) => {
    const [lo, hi] = ranges[s];
    ctx.strokeStyle = colors[s];
    ctx.beginPath();
    ys.forEach((y, i) => {
      const px = 10 + (width - 20) * (i / Math.max(1, ys.length - 1));
      const py = height - 10 - (height - 20) * ((y - lo) / (hi - lo));
      i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    });
    ctx.stroke();
  });
}

function drawChoice() {
  const scores = $("choice-scores").value.split(",").map(Number).filter((x) => !Number.isNaN(x));
  try {
    const p = choice_probabilities($("choice-kind").value, new Float64Array(scores), num("choice-null"), num("choice-attention"));
    const labels = scores.map((_, i) => `item ${i}`).concat(["no click"]);
    bars($("choice-canvas"), labels, Array.from(p), 1);
  } catch (e) {
    $("status").textContent = String(e);
  }
}

function drawNudge() {
  try {
    const t = JSON.parse(interest_trajectory(BigInt(num("nudge-seed")), num("nudge-initial"), num("nudge-fraction"), num("nudge-prob")));
    const b0 = t.budget[0];
    line($("nudge-canvas"), [t.interest, t.budget], ["#4a7bd0", "#d07a4a"], [[-1, 1], [0, b0]]);
    $("status").textContent = `interest (blue) over ${t.interest.length - 1} turns; budget (orange) from ${b0}`;
  } catch (e) {
    $("status").textContent = String(e);
  }
}

function runBandit() {
  $("status").textContent = "running...";
  setTimeout(() => {
    try {
      const rows = JSON.parse(latent_bandit_ctr(num("lb-scale"), num("lb-null"), BigInt(num("lb-seed")), BigInt(num("lb-iters"))));
      bars($("lb-canvas"), rows.map((r) => r.strategy), rows.map((r) => r.ctr), Math.max(...rows.map((r) => r.ctr), 0.01));
      $("status").textContent = "";
    } catch (e) {
      $("status").textContent = String(e);
    }
  }, 0);
}

await init();
$("status").textContent = "";
for (const id of ["choice-kind", "choice-scores", "choice-null", "choice-attention"]) $(id).addEventListener("input", drawChoice);
for (const id of ["nudge-initial", "nudge-fraction", "nudge-prob", "nudge-seed"]) $(id).addEventListener("input", drawNudge);
$("lb-run").addEventListener("click", runBandit);
drawChoice();
drawNudge();
