import { esc, num } from "./html.js";
import type { AlignmentDoc, GalleryRecord } from "./types.js";

// Slot geometry shared by the two strips and the correspondence overlay;
// keep in sync with .mini-card sizing in styles.css.
export const SLOT = 72;
export const GAP = 8;
const LINES_H = 64;

export function slotCenter(i: number): number {
  return i * (SLOT + GAP) + SLOT / 2;
}

/**
 * Parse a pasted baseline: a bare JSON id list, one timeline object
 * ({ids: [...]}), or a list of timeline objects as written next to a
 * generated corpus.  Returns one candidate id list per timeline.
 */
export function parseBaselineText(text: string): string[][] {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    throw new Error("baseline is not valid JSON");
  }
  const asIds = (x: unknown, where: string): string[] => {
    if (!Array.isArray(x) || x.length === 0 || !x.every((v) => typeof v === "string" && v !== "")) {
      throw new Error(`${where} must be a non-empty list of record id strings`);
    }
    if (x.length < 2) throw new Error(`${where} needs at least 2 ids`);
    return x as string[];
  };
  if (Array.isArray(doc) && doc.length > 0 && typeof doc[0] === "object" && doc[0] !== null) {
    return (doc as { ids?: unknown }[]).map((t, i) => asIds(t.ids, `timeline ${i + 1} "ids"`));
  }
  if (Array.isArray(doc)) return [asIds(doc, "baseline")];
  if (typeof doc === "object" && doc !== null) {
    return [asIds((doc as { ids?: unknown }).ids, `"ids"`)];
  }
  throw new Error("baseline must be an id list or a timeline object");
}

function miniCard(id: string, rec: GalleryRecord | undefined, assetBase: string): string {
  const thumb = rec?.thumbnail
    ? `<img src="${esc(assetBase + rec.thumbnail)}" alt="${esc(id)}">`
    : `<div class="no-thumb">${esc(id)}</div>`;
  return `<div class="mini-card" data-id="${esc(id)}" title="${esc(id)}">${thumb}</div>`;
}

function miniStrip(ids: string[], recs: Map<string, GalleryRecord>, assetBase: string, label: string): string {
  return `<div class="mini-strip" data-strip="${esc(label)}">${ids
    .map((id) => miniCard(id, recs.get(id), assetBase))
    .join("")}</div>`;
}

/** Two strips with the warping path drawn between matched images. */
export function renderCompare(
  routeIds: string[],
  baselineIds: string[],
  alignment: AlignmentDoc,
  recordsById: Map<string, GalleryRecord>,
  assetBase = "",
): string {
  const width = slotCenter(Math.max(routeIds.length, baselineIds.length) - 1) + SLOT;
  const lines = alignment.path
    .map(([i, j]) => {
      const x1 = slotCenter(i);
      const x2 = slotCenter(j);
      return `<line class="match-line" x1="${x1}" y1="0" x2="${x2}" y2="${LINES_H}"><title>${esc(routeIds[i] ?? "?")} ↔ ${esc(baselineIds[j] ?? "?")}</title></line>`;
    })
    .join("");
  return `<div class="compare">
    <p class="facts-row">
      DTW distance <strong data-field="distance">${num(alignment.distance)}</strong>
      &middot; mean path similarity <strong data-field="mean-similarity">${num(alignment.mean_similarity)}</strong>
    </p>
    <div class="compare-strips" style="width:${width}px">
      ${miniStrip(routeIds, recordsById, assetBase, "extracted")}
      <svg class="match-lines" width="${width}" height="${LINES_H}" viewBox="0 0 ${width} ${LINES_H}">${lines}</svg>
      ${miniStrip(baselineIds, recordsById, assetBase, "baseline")}
    </div>
  </div>`;
}
