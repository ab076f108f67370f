import { Api, ApiFailure } from "./api.js";
import {
  applyDateRange,
  renderCategoryOptions,
  renderGallery,
  renderPager,
  renderSelectionInfo,
} from "./gallery.js";
import { esc, num } from "./html.js";
import { parseBaselineText, renderCompare } from "./compare.js";
import { renderRouteGraph } from "./graphview.js";
import {
  renderFeasibilityNote,
  renderInfeasible,
  renderMapPanel,
  renderStrip,
} from "./narrative.js";
import {
  EMPTY_SELECTION,
  RequestGate,
  selectionAfterClick,
  sourcePrecedesTarget,
} from "./state.js";
import type { Selection } from "./state.js";
import { validateParams } from "./validate.js";
import type {
  FeasibilityDoc,
  GalleryRecord,
  InfeasibleDetail,
  NarrativeMapDoc,
} from "./types.js";

const PAGE_SIZE = 24;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const apiBase = new URLSearchParams(window.location.search).get("api") ?? "";
const api = new Api(apiBase);

// ---- mutable app state -------------------------------------------------

let page = 1;
let total = 0;
let pageRecords: GalleryRecord[] = [];
const recordsById = new Map<string, GalleryRecord>();
let selection: Selection = EMPTY_SELECTION;
let feasibility: FeasibilityDoc | null = null;
let currentMap: NarrativeMapDoc | null = null;
let extracting = false;

const galleryGate = new RequestGate();
const feasGate = new RequestGate();
const extractGate = new RequestGate();

// ---- dom handles -------------------------------------------------------

const banner = el<HTMLDivElement>("banner");
const gallery = el<HTMLDivElement>("gallery");
const pager = el<HTMLDivElement>("pager");
const selectionInfo = el<HTMLDivElement>("selection-info");
const filterCategory = el<HTMLSelectElement>("filter-category");
const filterLocation = el<HTMLInputElement>("filter-location");
const dateFrom = el<HTMLInputElement>("date-from");
const dateTo = el<HTMLInputElement>("date-to");
const paramK = el<HTMLInputElement>("param-k");
const paramMincover = el<HTMLInputElement>("param-mincover");
const paramSpace = el<HTMLSelectElement>("param-space");
const paramItf = el<HTMLInputElement>("param-itf");
const paramErrors = el<HTMLUListElement>("param-errors");
const feasNote = el<HTMLDivElement>("feas-note");
const btnExtract = el<HTMLButtonElement>("btn-extract");
const strip = el<HTMLDivElement>("strip");
const mapPanel = el<HTMLDivElement>("map-panel");
const graphview = el<HTMLDivElement>("graphview");
const baselineText = el<HTMLTextAreaElement>("baseline-text");
const baselineChoice = el<HTMLSelectElement>("baseline-choice");
const compareError = el<HTMLParagraphElement>("compare-error");
const compareResult = el<HTMLDivElement>("compare-result");
const historyBox = el<HTMLDivElement>("history");

// ---- rendering helpers -------------------------------------------------

function showBanner(message: string, retry: () => void): void {
  banner.hidden = false;
  banner.innerHTML = `<span>${esc(message)}</span> <button type="button" id="banner-retry">retry</button>`;
  el<HTMLButtonElement>("banner-retry").addEventListener("click", () => {
    banner.hidden = true;
    retry();
  });
}

function redrawGallery(): void {
  const visible = applyDateRange(pageRecords, dateFrom.value, dateTo.value);
  gallery.innerHTML = renderGallery(visible, selection, apiBase);
  pager.innerHTML = renderPager(page, PAGE_SIZE, total);
}

function redrawSelection(): void {
  const precedes = sourcePrecedesTarget(
    selection.sourceId ? recordsById.get(selection.sourceId) : undefined,
    selection.targetId ? recordsById.get(selection.targetId) : undefined,
  );
  selectionInfo.innerHTML = renderSelectionInfo(selection, precedes);
}

function currentParams() {
  return validateParams({
    K: paramK.value,
    mincover: paramMincover.value,
    space: paramSpace.value,
    itf: paramItf.checked,
  });
}

function redrawParamErrors(): void {
  const { errors } = currentParams();
  paramErrors.innerHTML = errors
    .map((e) => `<li><strong>${esc(e.field)}</strong>: ${esc(e.message)}</li>`)
    .join("");
}

function updateExtractButton(): void {
  btnExtract.disabled = !(feasibility?.feasible && !extracting);
}

// ---- api flows ---------------------------------------------------------

async function loadGallery(): Promise<void> {
  const token = galleryGate.begin();
  try {
    const doc = await api.listImages({
      page,
      pageSize: PAGE_SIZE,
      category: filterCategory.value || undefined,
      location: filterLocation.value.trim() || undefined,
    });
    if (!galleryGate.isCurrent(token)) return;
    total = doc.total;
    pageRecords = doc.records;
    for (const r of doc.records) recordsById.set(r.id, r);
    redrawGallery();
  } catch (err) {
    if (!galleryGate.isCurrent(token)) return;
    showBanner(`could not load images: ${err instanceof Error ? err.message : String(err)}`, loadGallery);
  }
}

async function loadCategories(): Promise<void> {
  try {
    const doc = await api.clusters();
    filterCategory.innerHTML = renderCategoryOptions(doc.categories, filterCategory.value);
  } catch {
    // filter stays on "all categories"; the gallery works without it
  }
}

async function checkFeasibility(): Promise<void> {
  feasibility = null;
  updateExtractButton();
  const { params } = currentParams();
  const { sourceId, targetId } = selection;
  if (!params || !sourceId || !targetId) {
    feasNote.innerHTML = "";
    return;
  }
  const precedes = sourcePrecedesTarget(recordsById.get(sourceId), recordsById.get(targetId));
  if (precedes === false) {
    feasNote.innerHTML = "";
    return;
  }
  const token = feasGate.begin();
  try {
    const doc = await api.feasibility({
      source_id: sourceId,
      target_id: targetId,
      K: params.K,
      mincover: params.mincover,
      space_name: params.space,
      itf: params.itf,
    });
    if (!feasGate.isCurrent(token)) return;
    feasibility = doc;
    feasNote.innerHTML = renderFeasibilityNote(doc);
  } catch (err) {
    if (!feasGate.isCurrent(token)) return;
    feasNote.innerHTML = `<p class="inline-error">${esc(err instanceof Error ? err.message : String(err))}</p>`;
  }
  updateExtractButton();
}

async function runExtraction(): Promise<void> {
  const { params } = currentParams();
  const { sourceId, targetId } = selection;
  if (!params || !sourceId || !targetId || extracting) return;
  extracting = true;
  updateExtractButton();
  const token = extractGate.begin();
  strip.innerHTML = `<p class="muted">extracting&hellip;</p>`;
  try {
    const doc = await api.extract({
      source_id: sourceId,
      target_id: targetId,
      K: params.K,
      mincover: params.mincover,
      space_name: params.space,
      itf: params.itf,
    });
    if (!extractGate.isCurrent(token)) return;
    currentMap = doc;
    strip.innerHTML = renderStrip(doc, recordsById, apiBase);
    mapPanel.innerHTML = renderMapPanel(doc, feasibility);
    void drawGraph(doc);
    void refreshHistory();
  } catch (err) {
    if (!extractGate.isCurrent(token)) return;
    currentMap = null;
    mapPanel.innerHTML = "";
    graphview.innerHTML = "";
    if (err instanceof ApiFailure && err.code === "infeasible") {
      strip.innerHTML = renderInfeasible((err.detail ?? {}) as InfeasibleDetail, err.message);
    } else {
      strip.innerHTML = "";
      showBanner(`extraction failed: ${err instanceof Error ? err.message : String(err)}`, runExtraction);
    }
  } finally {
    extracting = false;
    updateExtractButton();
  }
}

async function drawGraph(map: NarrativeMapDoc): Promise<void> {
  try {
    const g = await api.graph(map.params.space, map.params.itf);
    if (currentMap === map) graphview.innerHTML = renderRouteGraph(g, map.main_route);
  } catch {
    graphview.innerHTML = `<p class="muted">graph unavailable</p>`;
  }
}

async function refreshHistory(): Promise<void> {
  try {
    const doc = await api.history();
    const items = doc.extractions
      .slice(-5)
      .reverse()
      .map(
        (e) =>
          `<li><code>${esc(e.params.source_id)}</code> &rarr; <code>${esc(e.params.target_id)}</code>, ${e.route.length} images, &mu;* ${num(e.mu_star)}</li>`,
      )
      .join("");
    historyBox.innerHTML = doc.extractions.length
      ? `<h3>history (${doc.extractions.length})</h3><ul>${items}</ul>`
      : "";
  } catch {
    // history is cosmetic; ignore failures
  }
}

async function runCompare(): Promise<void> {
  compareError.textContent = "";
  if (!currentMap) {
    compareError.textContent = "extract a storyline first";
    return;
  }
  let candidates: string[][];
  try {
    candidates = parseBaselineText(baselineText.value);
  } catch (err) {
    compareError.textContent = err instanceof Error ? err.message : String(err);
    return;
  }
  const pick = Math.min(Number(baselineChoice.value) || 0, candidates.length - 1);
  const baseline = candidates[pick];
  try {
    const alignment = await api.evaluate(currentMap.main_route, baseline, currentMap.params.space);
    compareResult.innerHTML = renderCompare(
      currentMap.main_route,
      baseline,
      alignment,
      recordsById,
      apiBase,
    );
  } catch (err) {
    if (err instanceof ApiFailure && Array.isArray(err.detail)) {
      compareError.textContent = `${err.message}: ${JSON.stringify(err.detail)}`;
    } else {
      compareError.textContent = err instanceof Error ? err.message : String(err);
    }
  }
}

function refreshBaselineChoices(): void {
  let labels: string[] = [];
  try {
    labels = parseBaselineText(baselineText.value).map(
      (ids, i) => `timeline ${i + 1} (${ids.length} images)`,
    );
  } catch {
    // leave the picker empty while the text is invalid
  }
  baselineChoice.innerHTML = labels
    .map((l, i) => `<option value="${i}">${esc(l)}</option>`)
    .join("");
  baselineChoice.hidden = labels.length < 2;
}

// ---- wiring ------------------------------------------------------------

function onRecordClick(id: string): void {
  selection = selectionAfterClick(selection, id);
  extractGate.begin(); // an in-flight extraction no longer matches the selection
  redrawGallery();
  redrawSelection();
  void checkFeasibility();
}

gallery.addEventListener("click", (ev) => {
  const card = (ev.target as HTMLElement).closest<HTMLElement>(".card[data-id]");
  if (card?.dataset.id) onRecordClick(card.dataset.id);
});

pager.addEventListener("click", (ev) => {
  const btn = (ev.target as HTMLElement).closest<HTMLButtonElement>("button[data-action]");
  if (!btn || btn.disabled) return;
  page += btn.dataset.action === "page-next" ? 1 : -1;
  void loadGallery();
});

for (const input of [filterCategory, filterLocation]) {
  input.addEventListener("change", () => {
    page = 1;
    void loadGallery();
  });
}
for (const input of [dateFrom, dateTo]) {
  input.addEventListener("change", redrawGallery);
}

for (const input of [paramK, paramMincover, paramSpace, paramItf]) {
  input.addEventListener("input", () => {
    extractGate.begin();
    redrawParamErrors();
    void checkFeasibility();
  });
}

el<HTMLButtonElement>("btn-clear-selection").addEventListener("click", () => {
  selection = EMPTY_SELECTION;
  extractGate.begin();
  redrawGallery();
  redrawSelection();
  void checkFeasibility();
});

btnExtract.addEventListener("click", () => void runExtraction());
el<HTMLButtonElement>("btn-compare").addEventListener("click", () => void runCompare());
el<HTMLButtonElement>("btn-use-route").addEventListener("click", () => {
  if (currentMap) {
    baselineText.value = JSON.stringify(currentMap.main_route);
    refreshBaselineChoices();
  }
});
baselineText.addEventListener("input", refreshBaselineChoices);

redrawSelection();
redrawParamErrors();
void loadCategories();
void loadGallery();
