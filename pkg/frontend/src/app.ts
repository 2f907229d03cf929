/**
 * DOM glue for the analyst workbench. All state handling lives in the
 * flow modules; this file only wires inputs to flows and renders the
 * resulting view models. Served as a static asset next to the API.
 */

import { ApiClient, ApiError, type EngineKind, type Garment } from "./api";
import { AnnotateFlow, TrainFlow, reportTable, type AnnotateState } from "./flows";
import { buildGallery, galleryToCsv, toggleFalsePositive, type GalleryView } from "./gallery";
import { previewChips, previewLooksValid } from "./queryPreview";

const api = new ApiClient("");
const annotateFlow = new AnnotateFlow(api);
const trainFlow = new TrainFlow(api);

let annotateState: AnnotateState | null = null;
let gallery: GalleryView | null = null;
let currentDataset = "";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const node = el<HTMLElement>("status");
  node.textContent = text;
  node.className = isError ? "status error" : "status";
}

async function initDatasets(): Promise<void> {
  const { datasets } = await api.listDatasets();
  const select = el<HTMLSelectElement>("dataset");
  select.innerHTML = "";
  for (const name of datasets) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    select.appendChild(opt);
  }
  currentDataset = datasets[0] ?? "";
  select.onchange = () => {
    currentDataset = select.value;
  };
}

function renderLabelCounts(counts: Record<string, number>): void {
  const list = el<HTMLElement>("label-counts");
  list.innerHTML = "";
  for (const [key, n] of Object.entries(counts).sort()) {
    const li = document.createElement("li");
    li.textContent = `${key}: ${n}`;
    list.appendChild(li);
  }
}

function renderAnnotateGrid(): void {
  const grid = el<HTMLElement>("annotate-grid");
  grid.innerHTML = "";
  if (!annotateState) return;
  for (const id of annotateState.pending.slice(0, 60)) {
    const img = document.createElement("img");
    img.src = api.sampleImageUrl(id, annotateState.dataset);
    img.title = id;
    img.onclick = async () => {
      if (!annotateState) return;
      annotateState = await annotateFlow.submit(annotateState, id);
      renderLabelCounts(annotateState.labelCounts);
      renderAnnotateGrid();
    };
    grid.appendChild(img);
  }
}

function renderChips(text: string): void {
  const box = el<HTMLElement>("chips");
  box.innerHTML = "";
  const chips = previewChips(text);
  for (const chip of chips) {
    const span = document.createElement("span");
    span.className = `chip ${chip.kind}`;
    span.textContent = chip.text;
    box.appendChild(span);
  }
  el<HTMLButtonElement>("query-run").disabled = !previewLooksValid(chips);
}

function renderGallery(): void {
  const box = el<HTMLElement>("gallery");
  box.innerHTML = "";
  if (!gallery) return;
  el<HTMLElement>("query-echo").textContent =
    `${gallery.queryEcho} — ${gallery.engine}, ${gallery.timingMs.toFixed(0)} ms`;
  for (const item of gallery.items) {
    const card = document.createElement("figure");
    card.className = item.markedFalsePositive ? "hit fp" : "hit";
    const img = document.createElement("img");
    img.src = item.thumbnail;
    const cap = document.createElement("figcaption");
    cap.textContent = `#${item.rank} ${item.sampleId} (${item.scoreLabel})`;
    card.onclick = () => {
      if (!gallery) return;
      gallery = toggleFalsePositive(gallery, item.sampleId);
      renderGallery();
    };
    card.appendChild(img);
    card.appendChild(cap);
    box.appendChild(card);
  }
}

function wireAnnotate(): void {
  el<HTMLButtonElement>("annotate-start").onclick = async () => {
    const garment = el<HTMLSelectElement>("annotate-garment").value as Garment;
    const label = el<HTMLInputElement>("annotate-label").value.trim();
    if (!label) return setStatus("enter a color label first", true);
    annotateState = await annotateFlow.start(currentDataset, garment, label);
    renderLabelCounts(annotateState.labelCounts);
    renderAnnotateGrid();
    setStatus(`annotating ${label} / ${garment}: ${annotateState.pending.length} unlabeled`);
  };
}

function wireTrain(): void {
  el<HTMLButtonElement>("train-run").onclick = async () => {
    const label = el<HTMLInputElement>("train-label").value.trim();
    const garment = el<HTMLSelectElement>("train-garment").value as Garment;
    const engine = el<HTMLSelectElement>("train-engine").value as EngineKind;
    const kRaw = el<HTMLInputElement>("train-k").value;
    const outcome = await trainFlow.run({
      dataset: currentDataset,
      label,
      garment,
      engine,
      k: kRaw ? Number(kRaw) : undefined,
    });
    if (outcome.errorText) {
      setStatus(outcome.errorText, true);
    } else {
      setStatus(`trained ${outcome.job.model_id}`);
    }
  };
}

function wireQuery(): void {
  const input = el<HTMLInputElement>("query-text");
  input.oninput = () => renderChips(input.value);
  el<HTMLButtonElement>("query-run").onclick = async () => {
    const engine = el<HTMLSelectElement>("query-engine").value as EngineKind;
    try {
      const resp = await api.runQuery(currentDataset, input.value, { engine, topN: 20 });
      gallery = buildGallery(resp);
      renderGallery();
      setStatus(`ranked ${gallery.items.length} results`);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        setStatus(`${err.message}. Trained: ${err.trained.join(", ")}`, true);
      } else if (err instanceof ApiError) {
        setStatus(err.message, true);
      } else {
        throw err;
      }
    }
  };
  el<HTMLButtonElement>("query-export").onclick = () => {
    if (!gallery) return;
    const blob = new Blob([galleryToCsv(gallery)], { type: "text/csv" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "results.csv";
    a.click();
    URL.revokeObjectURL(a.href);
  };
}

function wireReport(): void {
  el<HTMLButtonElement>("report-load").onclick = async () => {
    const id = el<HTMLInputElement>("report-id").value.trim();
    const rows = reportTable(await api.getReport(id));
    const tbody = el<HTMLElement>("report-body");
    tbody.innerHTML = "";
    for (const row of rows) {
      const tr = document.createElement("tr");
      tr.innerHTML = "";
      for (const cell of [row.query, row.engine, String(row.k), row.bep, row.p10]) {
        const td = document.createElement("td");
        td.textContent = cell;
        tr.appendChild(td);
      }
      tbody.appendChild(tr);
    }
  };
}

export async function main(): Promise<void> {
  await initDatasets();
  wireAnnotate();
  wireTrain();
  wireQuery();
  wireReport();
  setStatus("ready");
}

if (typeof document !== "undefined" && document.getElementById("dataset")) {
  main().catch((err) => setStatus(String(err), true));
}
