import init, { fit_demo, node_table, constant_landscape } from "./pkg/semreg_web.js";

const presets = {
  small: { data: "x3,y\n1,5\n4,4\n-2,1\n", expr: "(2 / ((3 / (1 - (2 / x3))) + 1))" },
  line: { data: "x,y\n1,3\n2,5\n3,7\n4,9\n5,11\n6,13\n", expr: "(1 + (2 * x))" },
  cubic: {
    data: "x,y\n" + [-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2, 2.5].map((x) => `${x},${x * x * x - 2 * x + 1}`).join("\n") + "\n",
    expr: "((x * (x * x)) + 1)",
  },
  ratio: {
    data: "x,z,y\n" + [[1, 2], [2, 3], [3, 1], [4, 5], [5, 2], [6, 4]].map(([x, z]) => `${x},${z},${(x - 2) / z}`).join("\n") + "\n",
    expr: "(x / z)",
  },
};

const $ = (id) => document.getElementById(id);
const fmt = (v) => (v === null || v === undefined ? "-" : typeof v === "number" ? +v.toPrecision(6) + "" : String(v));

function show(id, err) {
  $(id).textContent = err ? String(err) : "";
  $(id).className = err ? "err" : "";
}

function loadPreset() {
  const p = presets[$("preset").value];
  $("data").value = p.data;
  $("expr").value = p.expr;
}

function axes(ctx, w, h, xs, ys) {
  const pad = 40;
  const lo = (a) => Math.min(...a), hi = (a) => Math.max(...a);
  let [x0, x1, y0, y1] = [lo(xs), hi(xs), lo(ys), hi(ys)];
  if (x0 === x1) { x0 -= 1; x1 += 1; }
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, 10, w - pad - 10, h - pad - 10);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText(fmt(y1), 2, 18);
  ctx.fillText(fmt(y0), 2, h - pad);
  ctx.fillText(fmt(x0), pad, h - pad + 14);
  ctx.fillText(fmt(x1), w - 60, h - pad + 14);
  return {
    x: (v) => pad + ((v - x0) / (x1 - x0)) * (w - pad - 10),
    y: (v) => 10 + (1 - (v - y0) / (y1 - y0)) * (h - pad - 10),
  };
}

function runFit() {
  let r;
  try {
    r = JSON.parse(fit_demo($("data").value, +$("strategy").value, +$("minimp").value, +$("maxnodes").value, $("goalmean").checked));
  } catch (e) {
    return show("fit-out", e.message || e);
  }
  show("fit-out");
  $("fit-out").textContent = `${r.expression}   mse ${fmt(r.train_mse)}, ${r.iterations} iterations, ${r.node_count} nodes, ${r.stop_reason}`;

  const c = $("fit-plot"), ctx = c.getContext("2d");
  const order = r.x.map((_, i) => i).sort((a, b) => r.x[a] - r.x[b]);
  const s = axes(ctx, c.width, c.height, r.x, r.targets.concat(r.outputs));
  ctx.fillStyle = "#c33";
  order.forEach((i) => ctx.fillRect(s.x(r.x[i]) - 3, s.y(r.targets[i]) - 3, 6, 6));
  ctx.strokeStyle = "#36c";
  ctx.beginPath();
  order.forEach((i, j) => (j ? ctx.lineTo : ctx.moveTo).call(ctx, s.x(r.x[i]), s.y(r.outputs[i])));
  ctx.stroke();
  ctx.fillText(`x axis: ${r.x_name}; red: targets, blue: fitted`, 50, c.height - 8);

  $("fit-steps").innerHTML = "<tr><th>iter</th><th>search</th><th>mse</th><th>nodes</th><th>expression</th></tr>" +
    r.steps.map((s) => `<tr><td>${s.iteration}</td><td class="l">${s.search ?? ""}</td><td>${fmt(s.mse)}</td><td>${s.node_count}</td><td class="l">${s.expression}</td></tr>`).join("");
}

function runNodes() {
  let r;
  try {
    r = JSON.parse(node_table($("data").value, $("expr").value));
  } catch (e) {
    $("nodes-table").innerHTML = "";
    return show("nodes-out", e.message || e);
  }
  show("nodes-out");
  $("nodes-out").textContent = `${r.expression}   mse ${fmt(r.mse)}`;
  const v = (a) => "(" + a.map(fmt).join(", ") + ")";
  const forb = (f) => (f === null ? "all" : f.map(v).join(" "));
  $("nodes-table").innerHTML =
    "<tr><th>id</th><th>node</th><th>semantics</th><th>a</th><th>b</th><th>c</th><th>d</th><th>forbidden</th><th>mse at own output</th></tr>" +
    r.nodes.map((n) => `<tr><td>${n.id}</td><td class="l">${"&nbsp;".repeat(2 * n.depth)}${n.label}</td><td>${v(n.semantics)}</td><td>${v(n.a)}</td><td>${v(n.b)}</td><td>${v(n.c)}</td><td>${v(n.d)}</td><td class="l">${forb(n.forbidden)}</td><td>${fmt(n.equation_mse)}</td></tr>`).join("");
}

function runLandscape() {
  let r;
  try {
    r = JSON.parse(constant_landscape($("data").value, $("expr").value, +$("lnode").value, +$("llo").value, +$("lhi").value, 1001));
  } catch (e) {
    return show("land-out", e.message || e);
  }
  show("land-out");
  $("land-out").textContent = `node ${r.node}: ${r.subtree}` +
    (r.best_k === null ? "   no constant found" : `   best k ${fmt(r.best_k)}, mse ${fmt(r.best_mse)} (${r.case})`);

  const c = $("land-plot"), ctx = c.getContext("2d");
  const pts = r.ks.map((k, i) => [k, r.mse[i]]).filter(([, m]) => m !== null);
  if (!pts.length) return ctx.clearRect(0, 0, c.width, c.height);
  // log scale keeps poles from flattening the rest of the curve
  const ly = (m) => Math.log10(m + 1e-300);
  const s = axes(ctx, c.width, c.height, r.ks, pts.map(([, m]) => ly(m)));
  ctx.strokeStyle = "#36c";
  ctx.beginPath();
  let prev = null;
  r.ks.forEach((k, i) => {
    const m = r.mse[i];
    if (m === null) { prev = null; return; }
    (prev === null ? ctx.moveTo : ctx.lineTo).call(ctx, s.x(k), s.y(ly(m)));
    prev = k;
  });
  ctx.stroke();
  const mark = (k, color) => {
    if (k === null || k < r.ks[0] || k > r.ks[r.ks.length - 1]) return;
    ctx.strokeStyle = color;
    ctx.beginPath();
    ctx.moveTo(s.x(k), 10);
    ctx.lineTo(s.x(k), c.height - 40);
    ctx.stroke();
  };
  mark(r.best_k, "#c33");
  mark(r.current, "#3a3");
  ctx.fillStyle = "#333";
  ctx.fillText("log10 mse; red: chosen k, green: current value", 50, c.height - 8);
}

await init();
$("preset").onchange = loadPreset;
$("fit").onclick = runFit;
$("nodes").onclick = runNodes;
$("land").onclick = runLandscape;
loadPreset();
runNodes();
