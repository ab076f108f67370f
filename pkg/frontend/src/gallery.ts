import { esc } from "./html.js";
import type { Selection } from "./state.js";
import type { GalleryRecord } from "./types.js";

function badge(text: string | null, kind: string, fallback: string): string {
  return `<span class="badge badge-${kind}">${esc(text ?? fallback)}</span>`;
}

function card(rec: GalleryRecord, sel: Selection, assetBase: string): string {
  const roles: string[] = [];
  if (rec.id === sel.sourceId) roles.push("is-source");
  if (rec.id === sel.targetId) roles.push("is-target");
  const thumb = rec.thumbnail
    ? `<img loading="lazy" src="${esc(assetBase + rec.thumbnail)}" alt="${esc(rec.id)}">`
    : `<div class="no-thumb">${esc(rec.id)}</div>`;
  const mark =
    rec.id === sel.sourceId ? `<span class="role-mark">S</span>`
    : rec.id === sel.targetId ? `<span class="role-mark">T</span>`
    : "";
  return `<button type="button" class="card ${roles.join(" ")}" data-id="${esc(rec.id)}" title="${esc(rec.id)}${rec.expert_labeled ? " (expert labeled)" : ""}">
    ${thumb}${mark}
    <span class="card-meta">${badge(rec.category, "cat", "unlabeled")}${badge(rec.date, "date", "undated")}</span>
  </button>`;
}

export function renderGallery(
  records: GalleryRecord[],
  sel: Selection,
  assetBase = "",
): string {
  if (records.length === 0) {
    return `<p class="empty-state">No images to show — the corpus is empty or the filters exclude everything.</p>`;
  }
  return `<div class="grid">${records.map((r) => card(r, sel, assetBase)).join("")}</div>`;
}

export function renderPager(page: number, pageSize: number, total: number): string {
  const pages = Math.max(1, Math.ceil(total / pageSize));
  return `<button type="button" data-action="page-prev" ${page <= 1 ? "disabled" : ""}>&larr;</button>
    <span class="pager-label">page ${page} / ${pages} &middot; ${total} images</span>
    <button type="button" data-action="page-next" ${page >= pages ? "disabled" : ""}>&rarr;</button>`;
}

export function renderCategoryOptions(categories: string[], current: string): string {
  const opts = categories
    .map((c) => `<option value="${esc(c)}" ${c === current ? "selected" : ""}>${esc(c)}</option>`)
    .join("");
  return `<option value="">all categories</option>${opts}`;
}

// The listing endpoint filters by category/location; the date range narrows
// the fetched page locally (display-side only).
export function applyDateRange(
  records: GalleryRecord[],
  from: string,
  to: string,
): GalleryRecord[] {
  if (!from && !to) return records;
  return records.filter((r) => {
    if (r.date === null) return false;
    if (from && r.date < from) return false;
    if (to && r.date > to) return false;
    return true;
  });
}

export function renderSelectionInfo(
  sel: Selection,
  precedes: boolean | null,
): string {
  const src = sel.sourceId ? `<code>${esc(sel.sourceId)}</code>` : "<em>click an image</em>";
  const tgt = sel.targetId ? `<code>${esc(sel.targetId)}</code>` : "<em>click a second image</em>";
  const warn =
    precedes === false
      ? `<p class="inline-error">target is dated before source — pick a later target or swap</p>`
      : "";
  return `<p>source: ${src}<br>target: ${tgt}</p>${warn}`;
}
