import type { GalleryRecord } from "./types.js";

export interface Selection {
  sourceId: string | null;
  targetId: string | null;
}

export const EMPTY_SELECTION: Selection = { sourceId: null, targetId: null };

// Click rules: the first empty slot (source, then target) takes the click;
// clicking an already-selected image clears just its slot; with both slots
// full a new image replaces the target.
export function selectionAfterClick(sel: Selection, id: string): Selection {
  if (sel.sourceId === id) return { sourceId: null, targetId: sel.targetId };
  if (sel.targetId === id) return { sourceId: sel.sourceId, targetId: null };
  if (sel.sourceId === null) return { sourceId: id, targetId: sel.targetId };
  return { sourceId: sel.sourceId, targetId: id };
}

// true / false when the dates decide it, null when they cannot (missing
// record, undated record, or a tie — the feasibility endpoint settles ties).
export function sourcePrecedesTarget(
  source: GalleryRecord | undefined,
  target: GalleryRecord | undefined,
): boolean | null {
  if (!source || !target || source.date === null || target.date === null) return null;
  if (source.date < target.date) return true;
  if (source.date > target.date) return false;
  return null;
}

/** Monotone sequence tokens; responses carrying a superseded token are stale. */
export class RequestGate {
  private seq = 0;

  begin(): number {
    this.seq += 1;
    return this.seq;
  }

  isCurrent(token: number): boolean {
    return token === this.seq;
  }
}
