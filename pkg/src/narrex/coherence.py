"""Pairwise similarity and the temporally ordered coherence graph.

An edge's coherence combines two unit-interval factors: clamped cosine
similarity of the visual embeddings and topic similarity of the cluster
probability rows (one minus the Jensen-Shannon divergence, log base 2).
The default combination is their geometric mean, so a near-zero factor on
either side pulls the weakest-link objective down hard; an arithmetic-mean
mode is available behind config.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .corpus import CorpusManifest, EmbeddingMatrix
from .errors import GraphBuildError

CoherenceMode = Literal["geometric", "arithmetic"]


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1] against rounding."""
    return float(np.clip(np.dot(np.asarray(a, dtype=np.float64),
                                np.asarray(b, dtype=np.float64)), -1.0, 1.0))


def _entropy2(p: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shannon entropy in bits with the 0*log0 = 0 convention."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=axis)


def topic_similarity(p: np.ndarray, q: np.ndarray) -> float:
    """1 - JSD(p, q) with log base 2; bounded in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    jsd = _entropy2(m) - 0.5 * (_entropy2(p) + _entropy2(q))
    return float(np.clip(1.0 - jsd, 0.0, 1.0))


def combine_coherence(raw_sim: float, topic_sim: float,
                      mode: CoherenceMode = "geometric") -> float:
    s_plus = max(0.0, raw_sim)
    if mode == "geometric":
        return float(np.sqrt(s_plus * topic_sim))
    if mode == "arithmetic":
        return 0.5 * (s_plus + topic_sim)
    raise GraphBuildError(f"unknown coherence mode {mode!r}")


def coherence(u: int, v: int, emb: EmbeddingMatrix, clusters: np.ndarray,
              mode: CoherenceMode = "geometric") -> float:
    """Coherence between the records at rows ``u`` and ``v``."""
    s = cosine_similarity(emb.data[u], emb.data[v])
    t = topic_similarity(clusters[u], clusters[v])
    return combine_coherence(s, t, mode)


@dataclass
class CoherenceGraph:
    """Forward DAG over the corpus in temporal order.

    ``node_order`` holds record row indices sorted by (effective date, id);
    every edge (u, v) satisfies pos(u) < pos(v), so topological order is the
    node order itself.  Edge tuples are (u_row, v_row, coherence,
    raw_similarity, topic_similarity).
    """

    node_order: list[int]
    edges: list[tuple[int, int, float, float, float]]
    space_name: str
    itf_applied: bool = False

    def __post_init__(self):
        self._pos = {row: p for p, row in enumerate(self.node_order)}

    def pos(self, row: int) -> int:
        return self._pos[row]

    @property
    def n(self) -> int:
        return len(self.node_order)

    def to_json(self, corpus: CorpusManifest) -> dict:
        ids = [corpus.records[row].id for row in self.node_order]
        return {
            "space": self.space_name,
            "itf_applied": self.itf_applied,
            "node_order": ids,
            "edges": [
                {
                    "source": corpus.records[u].id,
                    "target": corpus.records[v].id,
                    "coherence": coh,
                    "raw_similarity": raw,
                    "topic_similarity": topic,
                }
                for u, v, coh, raw, topic in self.edges
            ],
        }


def temporal_node_order(corpus: CorpusManifest) -> list[int]:
    """Record rows sorted by (effective date, id); every record must be dated."""
    keyed = []
    for i, rec in enumerate(corpus.records):
        date = rec.effective_date
        if date is None:
            raise GraphBuildError(f"record {rec.id!r} has no effective date; propagate dates first")
        keyed.append((corpus.day_offset(date), rec.id, i))
    keyed.sort()
    return [i for _, _, i in keyed]


def _pairwise_topic_similarity(f: np.ndarray) -> np.ndarray:
    """Dense n x n matrix of 1 - JSD between cluster rows, blockwise."""
    f = np.asarray(f, dtype=np.float64)
    sums = f.sum(axis=1, keepdims=True)
    f = f / np.where(sums > 0, sums, 1.0)  # guard float32 round trips
    n = f.shape[0]
    h = _entropy2(f)
    out = np.empty((n, n), dtype=np.float64)
    block = max(1, 2_000_000 // max(1, n * f.shape[1]))
    for start in range(0, n, block):
        stop = min(n, start + block)
        m = 0.5 * (f[start:stop, None, :] + f[None, :, :])
        hm = _entropy2(m, axis=2)
        jsd = hm - 0.5 * (h[start:stop, None] + h[None, :])
        out[start:stop] = 1.0 - jsd
    return np.clip(out, 0.0, 1.0)


def build_graph(corpus: CorpusManifest, emb: EmbeddingMatrix, clusters: np.ndarray,
                window: int | None = None, top_k_out: int | None = 20,
                mode: CoherenceMode = "geometric",
                tiebreak_rank: np.ndarray | None = None) -> CoherenceGraph:
    """Assemble the forward coherence DAG.

    Candidate edges connect each node to every later node within ``window``
    positions of the temporal order (``None`` means unbounded), then each
    node keeps its ``top_k_out`` strongest outgoing edges.  The edge to the
    immediate successor always survives pruning so a source-to-sink path
    exists under any setting; its coherence is computed like any other edge.

    ``tiebreak_rank`` (a permutation of node rows) orders candidates with
    equal coherence; by default ties follow the temporal order itself.
    """
    if corpus.n == 0:
        raise GraphBuildError("cannot build a coherence graph over an empty corpus")
    order = temporal_node_order(corpus)
    n = len(order)
    if window is not None and window < 1:
        raise GraphBuildError("window must be a positive integer or None")
    if top_k_out is not None and top_k_out < 1:
        raise GraphBuildError("top_k_out must be a positive integer or None")

    e = emb.data.astype(np.float64)[order]
    cos = np.clip(e @ e.T, -1.0, 1.0)
    topic = _pairwise_topic_similarity(np.asarray(clusters)[order])
    s_plus = np.maximum(cos, 0.0)
    if mode == "geometric":
        coh = np.sqrt(s_plus * topic)
    elif mode == "arithmetic":
        coh = 0.5 * (s_plus + topic)
    else:
        raise GraphBuildError(f"unknown coherence mode {mode!r}")

    if tiebreak_rank is None:
        rank = np.arange(corpus.n)
    else:
        rank = np.asarray(tiebreak_rank)
        if rank.shape != (corpus.n,):
            raise GraphBuildError("tiebreak_rank must have one entry per record")

    edges: list[tuple[int, int, float, float, float]] = []
    for p in range(n - 1):
        hi = n if window is None else min(n, p + window + 1)
        cand = np.arange(p + 1, hi)
        if cand.size == 0:
            continue
        if top_k_out is not None and cand.size > top_k_out:
            keys = sorted(
                range(cand.size),
                key=lambda idx: (-coh[p, cand[idx]], rank[order[cand[idx]]]),
            )
            keep = {int(cand[idx]) for idx in keys[:top_k_out]}
            keep.add(p + 1)  # fallback successor edge
        else:
            keep = {int(q) for q in cand}
        for q in sorted(keep):
            edges.append((order[p], order[q],
                          float(coh[p, q]), float(cos[p, q]), float(topic[p, q])))
    return CoherenceGraph(node_order=order, edges=edges, space_name=emb.space_name)


def itf_factors(corpus: CorpusManifest) -> dict[str, float]:
    """Normalized inverse topic frequency per effective category.

    ``log(1 + n/count)`` scaled by the maximum over classes, so the rarest
    class has factor 1 and factors lie in (0, 1].
    """
    counts: dict[str, int] = {}
    for rec in corpus.records:
        cat = rec.effective_category
        if cat is None:
            raise GraphBuildError(f"record {rec.id!r} has no effective category")
        counts[cat] = counts.get(cat, 0) + 1
    n = corpus.n
    raw = {c: float(np.log1p(n / cnt)) for c, cnt in counts.items()}
    peak = max(raw.values())
    return {c: v / peak for c, v in raw.items()}


def apply_itf_weighting(g: CoherenceGraph, corpus: CorpusManifest) -> CoherenceGraph:
    """Scale each edge's coherence by the inverse topic frequency of its head
    node's category; raw and topic similarities are left untouched."""
    factors = itf_factors(corpus)
    new_edges = [
        (u, v, coh * factors[corpus.records[v].effective_category], raw, topic)
        for u, v, coh, raw, topic in g.edges
    ]
    return replace(g, edges=new_edges, itf_applied=True)
