import init, { Explorer } from "./pkg/crashrisk_web.js";

const DAYS = ["MO", "TU", "WE", "TH", "FR", "SA", "SU"];
const MONTHS = ["JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC"];
const $ = (id) => document.getElementById(id);

const state = {
  explorer: null,
  fingerprint: null,
  month: 6,
  precip: 0,
  pins: [],
};

function showError(message) {
  const banner = $("banner");
  banner.textContent = message;
  banner.hidden = false;
}

function clearError() {
  $("banner").hidden = true;
}

function errorText(e) {
  return e instanceof Error ? e.message : String(e);
}

// Runs a model call and drops the result if the model changed meanwhile.
function guarded(call, render) {
  const fingerprint = state.fingerprint;
  let json;
  try {
    json = call(state.explorer);
  } catch (e) {
    showError(errorText(e));
    return;
  }
  if (fingerprint !== state.fingerprint) {
    showError("Model changed while a request was in flight; result discarded.");
    return;
  }
  clearError();
  render(JSON.parse(json));
}

function saveQuery() {
  const q = new URLSearchParams();
  q.set("month", state.month);
  q.set("precip", state.precip);
  q.set("seed", $("seed").value);
  q.set("alpha", $("alpha").value);
  q.set("effect", $("effect").value);
  if (state.pins.length) {
    q.set("pins", state.pins.map((p) => `${p.weekday}-${p.hour}-${p.month}`).join(","));
  }
  history.replaceState(null, "", `?${q}`);
}

function loadQuery() {
  const q = new URLSearchParams(location.search);
  const month = Number(q.get("month"));
  if (month >= 1 && month <= 12) state.month = month;
  if (q.has("precip")) state.precip = Number(q.get("precip")) || 0;
  for (const key of ["seed", "alpha", "effect"]) {
    if (q.has(key)) $(key).value = q.get(key);
  }
  state.pins = (q.get("pins") || "")
    .split(",")
    .filter(Boolean)
    .map((s) => {
      const [weekday, hour, month] = s.split("-");
      return { weekday, hour: Number(hour), month: Number(month) };
    })
    .filter((p) => DAYS.includes(p.weekday) && p.hour >= 0 && p.hour < 24 && p.month >= 1 && p.month <= 12);
}

function color(value, min, max) {
  const t = max > min ? (value - min) / (max - min) : 0;
  const hue = 120 * (1 - t);
  return `hsl(${hue}, 70%, ${45 + 15 * (1 - t)}%)`;
}

function samePin(a, b) {
  return a.weekday === b.weekday && a.hour === b.hour && a.month === b.month;
}

function togglePin(slot) {
  const i = state.pins.findIndex((p) => samePin(p, slot));
  if (i >= 0) state.pins.splice(i, 1);
  else state.pins.push(slot);
  saveQuery();
  renderPins();
  renderHeatmap();
}

function renderHeatmap() {
  if (!state.explorer) return;
  guarded(
    (ex) => ex.heatmap(state.month, state.precip),
    (map) => {
      const grid = $("grid");
      grid.replaceChildren();
      grid.append(Object.assign(document.createElement("div"), { className: "head" }));
      for (let h = 0; h < 24; h++) {
        grid.append(Object.assign(document.createElement("div"), { className: "head", textContent: h }));
      }
      let safest = null;
      map.cells.forEach((row, d) => {
        grid.append(Object.assign(document.createElement("div"), { className: "head", textContent: DAYS[d] }));
        row.forEach((value, h) => {
          const slot = { weekday: DAYS[d], hour: h, month: state.month };
          const cell = document.createElement("button");
          cell.style.background = color(value, map.min, map.max);
          cell.title = `${DAYS[d]} ${h}:00, ${MONTHS[state.month - 1]}: ${value.toFixed(2)} expected`;
          cell.setAttribute("aria-label", cell.title);
          cell.textContent = value.toFixed(1);
          if (state.pins.some((p) => samePin(p, slot))) cell.classList.add("pinned");
          if (safest === null && value === map.min) {
            safest = cell;
            cell.classList.add("safest");
          }
          cell.addEventListener("click", () => togglePin(slot));
          grid.append(cell);
        });
      });
    },
  );
}

function renderPins() {
  const list = $("pins");
  list.replaceChildren();
  for (const p of state.pins) {
    const li = document.createElement("li");
    const b = document.createElement("button");
    b.textContent = `${p.weekday} ${p.hour}:00 ${MONTHS[p.month - 1]} ×`;
    b.setAttribute("aria-label", `Unpin ${p.weekday} ${p.hour}:00 ${MONTHS[p.month - 1]}`);
    b.addEventListener("click", () => togglePin(p));
    li.append(b);
    list.append(li);
  }
  const empty = state.pins.length === 0;
  $("rank-btn").disabled = empty || !state.explorer;
  $("rank-hint").hidden = !empty;
}

function renderRanking() {
  const query = JSON.stringify({ slots: state.pins, precip: state.precip });
  guarded(
    (ex) => ex.rank(query),
    (ranked) => {
      const body = $("ranking").querySelector("tbody");
      body.replaceChildren();
      for (const r of ranked) {
        const tr = document.createElement("tr");
        for (const text of [
          r.rank,
          `${r.slot.weekday} ${r.slot.hour}:00 ${MONTHS[r.slot.month - 1]}`,
          r.expected_count.toFixed(3),
          r.relative_risk.toFixed(3),
        ]) {
          tr.append(Object.assign(document.createElement("td"), { textContent: text }));
        }
        body.append(tr);
      }
      $("ranking").hidden = false;
    },
  );
}

function renderCoefficients() {
  guarded(
    (ex) => ex.coefficients(),
    (doc) => {
      const body = $("coef-table").querySelector("tbody");
      body.replaceChildren();
      for (const row of doc.rows) {
        const tr = document.createElement("tr");
        if (row.reference) tr.className = "ref";
        const change = document.createElement("td");
        change.textContent = `${row.percent_change >= 0 ? "+" : ""}${row.percent_change.toFixed(1)}%`;
        change.className = row.reference ? "" : row.percent_change < 0 ? "neg" : "pos";
        tr.append(
          Object.assign(document.createElement("td"), { textContent: row.name }),
          Object.assign(document.createElement("td"), { textContent: row.coefficient.toFixed(4) }),
          change,
          Object.assign(document.createElement("td"), {
            textContent: row.p_value == null ? "ref" : row.p_value.toFixed(3),
          }),
        );
        body.append(tr);
      }
    },
  );
}

function useExplorer(explorer, label) {
  state.explorer = explorer;
  state.fingerprint = explorer.fingerprint;
  $("model-line").textContent = `${label}; fingerprint ${explorer.fingerprint.slice(0, 12)}`;
  const inches = explorer.precipMode === "inches";
  $("precip").step = inches ? "0.05" : "1";
  $("precip").max = inches ? "" : "1";
  $("precip-hint").textContent = inches ? "inches of rain" : "0 = dry, 1 = wet";
  $("ranking").hidden = true;
  renderHeatmap();
  renderPins();
  renderCoefficients();
}

function fitSynthetic() {
  const seed = Number($("seed").value) >>> 0;
  const alpha = Number($("alpha").value);
  const effect = Number($("effect").value);
  $("model-line").textContent = "Fitting...";
  // let the status line paint before the synchronous fit
  setTimeout(() => {
    try {
      useExplorer(Explorer.synthetic(seed, alpha, effect), `Synthetic year, seed ${seed}`);
      saveQuery();
    } catch (e) {
      showError(errorText(e));
    }
  }, 0);
}

async function main() {
  await init();
  const monthSelect = $("month");
  MONTHS.forEach((m, i) => monthSelect.append(new Option(m, i + 1)));
  loadQuery();
  monthSelect.value = state.month;
  $("precip").value = state.precip;

  monthSelect.addEventListener("change", () => {
    state.month = Number(monthSelect.value);
    saveQuery();
    renderHeatmap();
  });
  $("precip").addEventListener("change", () => {
    state.precip = Number($("precip").value);
    saveQuery();
    renderHeatmap();
  });
  $("synth-form").addEventListener("submit", (e) => {
    e.preventDefault();
    fitSynthetic();
  });
  $("artifact-file").addEventListener("change", async (e) => {
    const file = e.target.files[0];
    if (!file) return;
    try {
      useExplorer(Explorer.fromArtifact(await file.text()), file.name);
    } catch (err) {
      showError(errorText(err));
    }
  });
  $("rank-btn").addEventListener("click", renderRanking);
  fitSynthetic();
}

main().catch((e) => showError(errorText(e)));
