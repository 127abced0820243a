import init, { Demo } from "./pkg/softbot_web.js";

const COLORS = [null, "#5fa8d3", "#1b4965", "#e63946", "#f4a261"];
const NAMES = ["", "soft", "hard", "muscle A", "muscle B"];

const canvas = document.getElementById("view");
const ctx = canvas.getContext("2d");
const status = document.getElementById("status");
let demo;
let timer = null;

function stop() {
  if (timer !== null) clearInterval(timer);
  timer = null;
}

function drawGrid(codes, offset) {
  const w = demo.width(), h = demo.height();
  const cell = Math.floor(Math.min(canvas.width / w, canvas.height / h));
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const c = codes[offset + x + w * y];
      ctx.strokeStyle = "#eee";
      ctx.strokeRect(x * cell, (h - 1 - y) * cell, cell, cell);
      if (c === 0) continue;
      ctx.fillStyle = COLORS[c];
      ctx.fillRect(x * cell + 1, (h - 1 - y) * cell + 1, cell - 2, cell - 2);
    }
  }
}

function play(codes, label) {
  stop();
  const n = demo.width() * demo.height();
  const steps = codes.length / n;
  let k = 0;
  timer = setInterval(() => {
    drawGrid(codes, k * n);
    status.textContent = `${label}: step ${k} of ${steps - 1}`;
    if (++k === steps) stop();
  }, 250);
}

function loadGenome() {
  if (document.getElementById("genome").value === "walker") {
    demo.use_walker();
  } else {
    demo.randomize(BigInt(document.getElementById("seed").value), 2.0);
  }
}

function drawFrame(data, k, masses) {
  const base = 3 + k * masses * 2;
  let minX = Infinity, maxX = -Infinity;
  for (let f = 0; f < data[0]; f++) {
    for (let i = 0; i < masses; i++) {
      const x = data[3 + (f * masses + i) * 2];
      minX = Math.min(minX, x);
      maxX = Math.max(maxX, x);
    }
  }
  const scale = Math.min(40, (canvas.width - 40) / Math.max(1, maxX - minX));
  const ground = canvas.height - 30;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(0, ground);
  ctx.lineTo(canvas.width, ground);
  ctx.stroke();
  ctx.fillStyle = "#1b4965";
  for (let i = 0; i < masses; i++) {
    const x = 20 + (data[base + 2 * i] - minX) * scale;
    const z = ground - data[base + 2 * i + 1] * scale;
    ctx.fillRect(x - 2, z - 2, 4, 4);
  }
}

function simulate() {
  stop();
  const data = demo.simulate();
  const frames = data[0], masses = data[1], distance = data[2];
  if (masses === 0) {
    status.textContent = "Nothing to simulate: the body is empty.";
    return;
  }
  let k = 0;
  timer = setInterval(() => {
    drawFrame(data, k, masses);
    status.textContent = `t = ${(k * 0.01).toFixed(2)} s, distance ${distance.toFixed(3)} voxels`;
    if (++k === frames) stop();
  }, 40);
}

async function main() {
  await init();
  demo = new Demo();
  const legend = document.getElementById("legend");
  for (let c = 1; c < 5; c++) {
    legend.insertAdjacentHTML("beforeend", `<span style="background:${COLORS[c]}"></span>${NAMES[c]}`);
  }
  document.getElementById("grow").onclick = () => {
    loadGenome();
    play(demo.grow(), "growing");
  };
  document.getElementById("simulate").onclick = simulate;
  document.getElementById("regrow").onclick = () => play(demo.damage_and_regrow(), "regrowing");
  play(demo.grow(), "growing");
}

main();
