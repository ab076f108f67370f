import { esc, num } from "./html.js";
import type { GraphDoc } from "./types.js";

// Per route node, at most this many context edges are drawn (strongest
// first) so dense graphs stay legible.  Purely a display cap.
const CONTEXT_FAN = 6;

const W = 960;
const H = 280;
const PAD = 30;
const MID = H / 2;

interface Placed {
  id: string;
  x: number;
  y: number;
  onRoute: boolean;
}

function stagger(order: number): number {
  // alternate context nodes above/below the route line, three rows each side
  const side = order % 2 === 0 ? -1 : 1;
  const row = 1 + (Math.floor(order / 2) % 3);
  return MID + side * row * 34;
}

/**
 * SVG of the route embedded in its temporal neighborhood.  The x axis is
 * the graph's node order (time); route nodes sit on the center line.
 */
export function renderRouteGraph(graph: GraphDoc, route: string[]): string {
  const orderIndex = new Map(graph.node_order.map((id, i) => [id, i]));
  const routeSet = new Set(route);

  const incident = graph.edges.filter(
    (e) => routeSet.has(e.source) || routeSet.has(e.target),
  );
  const context = incident
    .filter((e) => !(routeSet.has(e.source) && routeSet.has(e.target)))
    .sort((a, b) => b.coherence - a.coherence);
  const fan = new Map<string, number>();
  const kept = context.filter((e) => {
    const anchor = routeSet.has(e.source) ? e.source : e.target;
    const used = fan.get(anchor) ?? 0;
    if (used >= CONTEXT_FAN) return false;
    fan.set(anchor, used + 1);
    return true;
  });

  const drawn = new Set<string>(route);
  for (const e of kept) {
    drawn.add(e.source);
    drawn.add(e.target);
  }
  const idxs = [...drawn].map((id) => orderIndex.get(id) ?? 0);
  const lo = Math.min(...idxs);
  const hi = Math.max(...idxs);
  const span = Math.max(1, hi - lo);
  const xOf = (id: string): number =>
    PAD + (((orderIndex.get(id) ?? 0) - lo) / span) * (W - 2 * PAD);

  const placed = new Map<string, Placed>();
  route.forEach((id) => placed.set(id, { id, x: xOf(id), y: MID, onRoute: true }));
  let n = 0;
  for (const id of drawn) {
    if (!placed.has(id)) {
      placed.set(id, { id, x: xOf(id), y: stagger(n), onRoute: false });
      n += 1;
    }
  }

  const line = (ax: number, ay: number, bx: number, by: number, cls: string, tip: string) =>
    `<line class="${cls}" x1="${ax.toFixed(1)}" y1="${ay.toFixed(1)}" x2="${bx.toFixed(1)}" y2="${by.toFixed(1)}"><title>${esc(tip)}</title></line>`;

  const edgeSvg: string[] = [];
  for (const e of kept) {
    const a = placed.get(e.source)!;
    const b = placed.get(e.target)!;
    edgeSvg.push(line(a.x, a.y, b.x, b.y, "g-edge-context",
      `${e.source} → ${e.target}: ${num(e.coherence)}`));
  }
  for (let i = 1; i < route.length; i++) {
    const a = placed.get(route[i - 1])!;
    const b = placed.get(route[i])!;
    const e = graph.edges.find((x) => x.source === route[i - 1] && x.target === route[i]);
    edgeSvg.push(line(a.x, a.y, b.x, b.y, "g-edge-route",
      e ? `${e.source} → ${e.target}: ${num(e.coherence)}` : `${route[i - 1]} → ${route[i]}`));
  }

  const nodeSvg = [...placed.values()]
    .map((p) => {
      const r = p.onRoute ? 7 : 4;
      const label = p.onRoute
        ? `<text class="g-label" x="${p.x.toFixed(1)}" y="${(p.y - 12).toFixed(1)}">${route.indexOf(p.id) + 1}</text>`
        : "";
      return `<circle class="${p.onRoute ? "g-node-route" : "g-node-context"}" data-id="${esc(p.id)}" cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" r="${r}"><title>${esc(p.id)}</title></circle>${label}`;
    })
    .join("");

  return `<svg viewBox="0 0 ${W} ${H}" role="img" aria-label="route neighborhood, time left to right">
    <line class="g-axis" x1="${PAD}" y1="${H - 12}" x2="${W - PAD}" y2="${H - 12}"></line>
    <text class="g-axis-label" x="${W - PAD}" y="${H - 20}">time &rarr;</text>
    ${edgeSvg.join("")}${nodeSvg}
  </svg>`;
}
