import { vi } from "vitest";
import type { GalleryRecord } from "../src/types";

/** Minimal Response stand-in covering what the client reads. */
export function jsonResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    text: async () => JSON.stringify(body),
  } as unknown as Response;
}

export function stubFetch(status: number, body: unknown): ReturnType<typeof vi.fn> {
  const fn = vi.fn(async () => jsonResponse(status, body));
  vi.stubGlobal("fetch", fn);
  return fn;
}

export function record(id: string, date: string | null, category: string | null): GalleryRecord {
  return {
    id,
    date,
    category,
    location: "site-a",
    expert_labeled: false,
    thumbnail: null,
  };
}

export function recordMap(recs: GalleryRecord[]): Map<string, GalleryRecord> {
  return new Map(recs.map((r) => [r.id, r]));
}

/** Text content of the element carrying data-field="name". */
export function fieldText(html: string, name: string): string {
  const m = html.match(new RegExp(`data-field="${name}">([^<]*)<`));
  if (!m) throw new Error(`no data-field="${name}" in rendered html`);
  return m[1];
}
