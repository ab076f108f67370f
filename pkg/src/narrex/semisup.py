"""Semi-supervised propagation of categories and dates.

Labels spread over a symmetrized k-NN affinity graph built on the augmented
feature space: unit visual embeddings concatenated with weighted one-hot
location tags.  The spread iterates ``F <- alpha * S @ F + (1 - alpha) * Y``
with ``S = D^{-1/2} W D^{-1/2}``, whose fixed point is the closed form
``(1 - alpha) * (I - alpha S)^{-1} Y``; seeds are soft-clamped through the
``(1 - alpha) Y`` term.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .corpus import CorpusManifest, EmbeddingMatrix
from .errors import GraphBuildError, NarrexError, UnreachableNodeError


@dataclass
class AffinityGraph:
    """Symmetric non-negative weights with zero diagonal."""

    weights: sparse.csr_matrix
    kernel_bandwidth: float
    knn_k: int

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass
class LabelSeed:
    class_names: list[str]
    seed_rows: dict[int, int]

    def __post_init__(self):
        if not self.seed_rows:
            raise NarrexError("label seed must contain at least one seeded row")
        for row, cls in self.seed_rows.items():
            if not 0 <= cls < len(self.class_names):
                raise NarrexError(f"seed class index {cls} out of range for row {row}")


@dataclass
class ClusterDistribution:
    """Row-stochastic per-node class probabilities after spreading."""

    F: np.ndarray  # (n, c) rows summing to 1
    alpha: float
    converged: bool
    iterations: int


def build_augmented_features(corpus: CorpusManifest, emb: EmbeddingMatrix,
                             location_weight: float = 1.0) -> np.ndarray:
    """Concatenate unit embeddings with weighted one-hot location tags.

    Records without a location tag get an all-zero location block, which
    leaves them unpenalized in the distance computation.
    """
    if location_weight < 0:
        raise NarrexError("location_weight must be non-negative")
    n, d = emb.n, emb.d
    n_loc = len(corpus.locations)
    loc_index = {name: j for j, name in enumerate(corpus.locations)}
    out = np.zeros((n, d + n_loc), dtype=np.float64)
    out[:, :d] = emb.data.astype(np.float64)
    for i, rec in enumerate(corpus.records):
        if rec.location_tag is not None:
            out[i, d + loc_index[rec.location_tag]] = location_weight
    return out


def build_affinity(features: np.ndarray, knn_k: int = 10,
                   sigma: float | None = None) -> AffinityGraph:
    """RBF kernel on the symmetrized k-NN graph (Euclidean distances).

    ``sigma=None`` uses the median distance over all (node, k-NN) pairs.  A
    zero bandwidth degenerates to the kernel limit: weight 1 at distance 0 and
    0 elsewhere, which keeps duplicate-point corpora well defined.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if n < 2:
        raise GraphBuildError(f"affinity graph needs at least 2 nodes, got {n}")
    if not 1 <= knn_k < n:
        raise GraphBuildError(f"knn_k must satisfy 1 <= k < n, got k={knn_k}, n={n}")

    sq = np.sum(features ** 2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (features @ features.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)

    # stable k-NN selection: ties broken by column index via argsort
    order = np.argsort(d2, axis=1, kind="stable")[:, :knn_k]
    knn_d2 = np.take_along_axis(d2, order, axis=1)

    if sigma is None:
        sigma = float(np.median(np.sqrt(knn_d2)))
    if sigma < 0:
        raise GraphBuildError("sigma must be positive")

    rows = np.repeat(np.arange(n), knn_k)
    cols = order.ravel()
    if sigma == 0.0:
        vals = (knn_d2.ravel() == 0.0).astype(np.float64)
    else:
        vals = np.exp(-knn_d2.ravel() / (2.0 * sigma * sigma))
    w = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    w = w.maximum(w.T)  # symmetrize by max
    w.setdiag(0.0)
    w.eliminate_zeros()

    # zero-bandwidth limits and kernel underflow can drop every edge of a node
    degrees = np.asarray((w > 0).sum(axis=1)).ravel()
    isolated = np.where(degrees == 0)[0]
    if isolated.size:
        raise GraphBuildError(
            f"node {int(isolated[0])} has no neighbors (sigma={sigma:g} collapsed its kernel weights)"
        )
    return AffinityGraph(weights=w, kernel_bandwidth=sigma, knn_k=knn_k)


def spread_labels(g: AffinityGraph, seeds: LabelSeed, alpha: float = 0.9,
                  tol: float = 1e-6, max_iter: int = 1000) -> ClusterDistribution:
    """Iterate the normalized spread until the max row-wise change drops
    below ``tol``; rows are normalized to sum 1 at the end.

    ``alpha=0`` is the degenerate no-spread limit (F equals the seed matrix),
    accepted so the seed-fixed-point property is exact; configs restrict the
    user-facing domain to (0, 1).
    """
    if not 0.0 <= alpha < 1.0:
        raise NarrexError(f"alpha must be in [0, 1), got {alpha}")
    n = g.n
    c = len(seeds.class_names)
    y = np.zeros((n, c), dtype=np.float64)
    for row, cls in seeds.seed_rows.items():
        if not 0 <= row < n:
            raise NarrexError(f"seed row {row} out of range")
        y[row, cls] = 1.0

    deg = np.asarray(g.weights.sum(axis=1)).ravel()
    if np.any(deg <= 0):
        bad = int(np.where(deg <= 0)[0][0])
        raise GraphBuildError(f"node {bad} has zero degree; affinity graph is invalid")
    inv_sqrt = 1.0 / np.sqrt(deg)
    s = sparse.diags(inv_sqrt) @ g.weights @ sparse.diags(inv_sqrt)

    f = y.copy()
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        f_next = alpha * (s @ f) + (1.0 - alpha) * y
        delta = float(np.max(np.abs(f_next - f))) if n else 0.0
        f = f_next
        if delta < tol:
            converged = True
            break

    row_sums = f.sum(axis=1)
    dead = np.where(row_sums <= 0.0)[0]
    if dead.size:
        raise UnreachableNodeError(int(dead[0]))
    f = f / row_sums[:, None]

    _warn_on_seed_flips(f, seeds, alpha)
    return ClusterDistribution(F=f, alpha=alpha, converged=converged, iterations=iterations)


def _warn_on_seed_flips(f: np.ndarray, seeds: LabelSeed, alpha: float) -> None:
    flipped = [row for row, cls in seeds.seed_rows.items() if int(np.argmax(f[row])) != cls]
    if flipped:
        warnings.warn(
            f"{len(flipped)} seeded rows changed argmax class under soft clamping "
            f"(alpha={alpha}); first: row {flipped[0]}",
            stacklevel=3,
        )


def closed_form_spread(g: AffinityGraph, seeds: LabelSeed, alpha: float) -> np.ndarray:
    """Dense fixed-point solution ``(1-alpha)(I - alpha S)^{-1} Y``, rows
    normalized.  Quadratic in n; intended for validation at small scale."""
    n = g.n
    c = len(seeds.class_names)
    y = np.zeros((n, c), dtype=np.float64)
    for row, cls in seeds.seed_rows.items():
        y[row, cls] = 1.0
    w = g.weights.toarray()
    deg = w.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    s = inv_sqrt[:, None] * w * inv_sqrt[None, :]
    f = (1.0 - alpha) * np.linalg.solve(np.eye(n) - alpha * s, y)
    sums = f.sum(axis=1)
    if np.any(sums <= 0):
        raise UnreachableNodeError(int(np.where(sums <= 0)[0][0]))
    return f / sums[:, None]


@dataclass
class PropagationParams:
    """Knobs for both propagation passes."""

    location_weight: float = 1.0
    knn_k: int = 10
    sigma: float | None = None
    alpha: float = 0.9
    tol: float = 1e-6
    max_iter: int = 1000

    def effective_k(self, n: int) -> int:
        return min(self.knn_k, n - 1)


def _spread_over_corpus(corpus: CorpusManifest, emb: EmbeddingMatrix,
                        seeds: LabelSeed, params: PropagationParams) -> ClusterDistribution:
    features = build_augmented_features(corpus, emb, params.location_weight)
    graph = build_affinity(features, params.effective_k(corpus.n), params.sigma)
    return spread_labels(graph, seeds, params.alpha, params.tol, params.max_iter)


def propagate_categories(corpus: CorpusManifest, emb: EmbeddingMatrix,
                         params: PropagationParams | None = None) -> ClusterDistribution:
    """Fill ``propagated_category`` on every record from the argmax of its
    spread row; expert rows keep their expert value.  Returns the full
    distribution for downstream topic similarity."""
    params = params or PropagationParams()
    if not emb.normalized:
        raise NarrexError("embeddings must be normalized before propagation")
    cat_index = {c: j for j, c in enumerate(corpus.categories)}
    seed_rows = {
        i: cat_index[rec.expert_category]
        for i, rec in enumerate(corpus.records)
        if rec.expert_category is not None
    }
    if not seed_rows:
        raise NarrexError("category propagation needs at least one expert category")
    seeds = LabelSeed(class_names=list(corpus.categories), seed_rows=seed_rows)
    dist = _spread_over_corpus(corpus, emb, seeds, params)
    for i, rec in enumerate(corpus.records):
        if rec.expert_category is not None:
            rec.propagated_category = rec.expert_category
        else:
            rec.propagated_category = corpus.categories[int(np.argmax(dist.F[i]))]
    return dist


def propagate_dates(corpus: CorpusManifest, emb: EmbeddingMatrix,
                    params: PropagationParams | None = None) -> ClusterDistribution:
    """Spread over distinct expert-date bins, then assign each undated record
    the probability-weighted mean day offset, rounded to the nearest day.

    The weighted mean keeps the propagated order smooth; downstream ordering
    breaks remaining ties by record id.
    """
    params = params or PropagationParams()
    if not emb.normalized:
        raise NarrexError("embeddings must be normalized before propagation")
    expert_dates = sorted({rec.expert_date for rec in corpus.records if rec.expert_date is not None})
    if len(expert_dates) < 2:
        raise NarrexError("date propagation needs at least two distinct expert dates")
    offsets = np.array([corpus.day_offset(d) for d in expert_dates], dtype=np.float64)
    bin_index = {d: j for j, d in enumerate(expert_dates)}
    seed_rows = {
        i: bin_index[rec.expert_date]
        for i, rec in enumerate(corpus.records)
        if rec.expert_date is not None
    }
    seeds = LabelSeed(class_names=[d.isoformat() for d in expert_dates], seed_rows=seed_rows)
    dist = _spread_over_corpus(corpus, emb, seeds, params)
    mean_offsets = dist.F @ offsets
    for i, rec in enumerate(corpus.records):
        if rec.expert_date is not None:
            rec.propagated_date = rec.expert_date
        else:
            # round half up for a deterministic nearest day
            day = int(np.floor(mean_offsets[i] + 0.5))
            rec.propagated_date = corpus.date_from_offset(day)
    return dist
