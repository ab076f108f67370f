import { describe, expect, it } from "vitest";

import { parseBaselineText, renderCompare, slotCenter } from "../src/compare";
import type { AlignmentDoc } from "../src/types";
import { fieldText, record, recordMap } from "./helpers";

describe("baseline parsing", () => {
  it("accepts a bare id list", () => {
    expect(parseBaselineText('["a", "b", "c"]')).toEqual([["a", "b", "c"]]);
  });

  it("accepts one timeline object", () => {
    expect(parseBaselineText('{"ids": ["a", "b"], "label": "BASELINE"}')).toEqual([["a", "b"]]);
  });

  it("accepts a timelines file and keeps every entry", () => {
    const text = '[{"ids": ["a", "b"], "label": "BASELINE", "length": 2}, {"ids": ["x", "y", "z"]}]';
    expect(parseBaselineText(text)).toEqual([
      ["a", "b"],
      ["x", "y", "z"],
    ]);
  });

  it.each([
    ["not json", "valid JSON"],
    ['["only-one"]', "at least 2"],
    ["[]", "record id strings"],
    ["[1, 2]", "record id strings"],
    ['[{"ids": []}]', "record id strings"],
    ['{"nope": 1}', "record id strings"],
    ['["a", ""]', "record id strings"],
    ["42", "id list or a timeline object"],
  ])("rejects %j", (text, fragment) => {
    expect(() => parseBaselineText(text)).toThrow(fragment);
  });
});

function lineEndpoints(html: string): { x1: number; x2: number }[] {
  return [...html.matchAll(/class="match-line" x1="([\d.]+)" y1="0" x2="([\d.]+)"/g)].map((m) => ({
    x1: Number(m[1]),
    x2: Number(m[2]),
  }));
}

const RECORDS = recordMap(
  ["r1", "r2", "r3", "b1", "b2", "b3", "b4", "b5"].map((id) => record(id, "2019-01-01", null)),
);

describe("alignment display", () => {
  it("draws one monotone non-crossing line per matched pair", () => {
    const alignment: AlignmentDoc = {
      path: [[0, 0], [0, 1], [1, 2], [2, 3], [2, 4]],
      distance: 1.2345678901234567,
      mean_similarity: 0.7654321098765432,
    };
    const html = renderCompare(
      ["r1", "r2", "r3"],
      ["b1", "b2", "b3", "b4", "b5"],
      alignment,
      RECORDS,
    );
    const lines = lineEndpoints(html);
    expect(lines).toHaveLength(alignment.path.length);
    for (const [k, { x1, x2 }] of lines.entries()) {
      expect(x1).toBe(slotCenter(alignment.path[k][0]));
      expect(x2).toBe(slotCenter(alignment.path[k][1]));
    }
    for (let k = 1; k < lines.length; k++) {
      expect(lines[k].x1).toBeGreaterThanOrEqual(lines[k - 1].x1);
      expect(lines[k].x2).toBeGreaterThanOrEqual(lines[k - 1].x2);
    }
  });

  it("shows distance and mean similarity exactly as returned", () => {
    const alignment: AlignmentDoc = {
      path: [[0, 0], [1, 1]],
      distance: 0.30000000000000004,
      mean_similarity: 0.8499999999999996,
    };
    const html = renderCompare(["r1", "r2"], ["b1", "b2"], alignment, RECORDS);
    expect(Number(fieldText(html, "distance"))).toBe(alignment.distance);
    expect(Number(fieldText(html, "mean-similarity"))).toBe(alignment.mean_similarity);
  });

  it("aligning a route with itself is the diagonal at distance zero", () => {
    const alignment: AlignmentDoc = {
      path: [[0, 0], [1, 1], [2, 2]],
      distance: 0,
      mean_similarity: 1,
    };
    const html = renderCompare(["r1", "r2", "r3"], ["r1", "r2", "r3"], alignment, RECORDS);
    for (const { x1, x2 } of lineEndpoints(html)) expect(x1).toBe(x2);
    expect(fieldText(html, "distance")).toBe("0");
    expect(fieldText(html, "mean-similarity")).toBe("1");
  });

  it("renders both strips in the ids' order", () => {
    const alignment: AlignmentDoc = { path: [[0, 0], [1, 1]], distance: 0.5, mean_similarity: 0.9 };
    const html = renderCompare(["r2", "r1"], ["b3", "b1"], alignment, RECORDS);
    const top = html.match(/data-strip="extracted">([\s\S]*?)<svg/)?.[1] ?? "";
    const ids = [...top.matchAll(/data-id="([^"]+)"/g)].map((m) => m[1]);
    expect(ids).toEqual(["r2", "r1"]);
  });
});
