"""Synthetic planted-narrative corpora.

A corpus is a temporally ordered sequence of records walking through a
fixed sequence of thematic stages.  Each stage has a unit-sphere centroid;
consecutive stage centroids sit at a controlled angle (a drift walk) so the
planted storyline is metrically gradual, while every centroid pair keeps a
minimum separation angle.  Record embeddings are noisy copies of their
stage centroid; a fraction of records carry expert labels and dates.

The generator also emits evenly spaced ground-truth timelines of the
standard lengths, usable directly as evaluation baselines.
"""
from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import (CorpusManifest, EmbeddingMatrix, ImageRecord,
                     make_embedding_matrix)
from .errors import NarrexError
from .evaluate import Timeline

EPOCH = datetime.date(2019, 1, 1)
TIMELINE_LENGTHS = (5, 10, 15, 20, 25, 30)
# adjacent stage centroids sit this factor above the minimum pairwise angle;
# all other pairs sit at least _FAR_FACTOR above it, so skipping a stage is
# always a longer jump than moving to the next one
_DRIFT_FACTOR = 1.3
_FAR_FACTOR = 1.7
_CENTROID_ATTEMPTS = 200


@dataclass
class SynthConfig:
    n: int = 200
    c: int = 5
    d: int = 32
    stages: list[int] = field(default_factory=list)  # empty -> 0..c-1 in order
    noise_sigma: float | None = None                 # None -> separation margin
    label_fraction: float = 0.3
    date_span_days: int = 365
    rng_seed: int = 0
    min_angle_deg: float = 35.0
    num_locations: int = 3
    low_dim: int | None = None                       # emit a "low" space sidecar

    def __post_init__(self) -> None:
        if not self.stages:
            self.stages = list(range(self.c))

    def validate(self) -> None:
        if self.c < 2:
            raise NarrexError(f"need at least 2 clusters, got {self.c}")
        if self.d < 2:
            raise NarrexError(f"embedding dimension must be >= 2, got {self.d}")
        if not self.stages:
            raise NarrexError("stages must be non-empty")
        if any(not 0 <= s < self.c for s in self.stages):
            raise NarrexError(f"stages must index clusters 0..{self.c - 1}")
        if not 0.0 < self.label_fraction <= 1.0:
            raise NarrexError(f"label_fraction must lie in (0, 1], got {self.label_fraction}")
        if self.label_fraction * self.n < self.c:
            raise NarrexError(
                f"label_fraction {self.label_fraction} over n={self.n} cannot seed all "
                f"{self.c} clusters")
        if self.n < len(self.stages):
            raise NarrexError(f"n={self.n} is smaller than the {len(self.stages)}-stage storyline")
        if self.date_span_days < 1:
            raise NarrexError(f"date_span_days must be >= 1, got {self.date_span_days}")
        if not 0.0 < self.min_angle_deg < 180.0:
            raise NarrexError(f"min_angle_deg must lie in (0, 180), got {self.min_angle_deg}")
        if self.num_locations < 1:
            raise NarrexError(f"num_locations must be >= 1, got {self.num_locations}")
        if self.low_dim is not None and self.low_dim < 2:
            raise NarrexError(f"low_dim must be >= 2, got {self.low_dim}")

    def separation_margin(self) -> float:
        """Noise level below which stages stay cleanly separable.

        Perturbing a unit centroid by N(0, sigma^2 I_d) tilts it by roughly
        atan(sigma*sqrt(d)); keeping that at half the minimum centroid angle
        leaves within-stage similarity clearly above between-stage.
        """
        return math.radians(self.min_angle_deg) / (2.0 * math.sqrt(self.d))

    def effective_noise_sigma(self) -> float:
        return self.separation_margin() if self.noise_sigma is None else self.noise_sigma


@dataclass
class GeneratedCorpus:
    manifest: CorpusManifest
    embedding: EmbeddingMatrix
    timelines: dict[int, Timeline]
    noise_sigma: float
    separation_margin: float
    stage_of: list[int]  # per-record index into config.stages


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _drift_centroids(rng: np.random.Generator, c: int, d: int,
                     min_angle: float, stages: list[int]) -> np.ndarray:
    """Unit centroids along the storyline: consecutive stages sit at a fixed
    adjacent angle, every other pair strictly farther, so the gradual path
    through the stages is always metrically shorter than skipping one."""
    adjacent = min(min_angle * _DRIFT_FACTOR, math.pi / 2)
    far_cos = math.cos(min(min_angle * _FAR_FACTOR, math.pi * 0.6))
    centroids: dict[int, np.ndarray] = {}

    def place(anchor: np.ndarray | None, others: list[np.ndarray]) -> np.ndarray:
        for _attempt in range(_CENTROID_ATTEMPTS):
            g = rng.normal(size=d)
            if anchor is None:
                cand = _unit(g)
            else:
                ortho = g - (g @ anchor) * anchor
                norm = np.linalg.norm(ortho)
                if norm < 1e-12:
                    continue
                cand = _unit(math.cos(adjacent) * anchor + math.sin(adjacent) * (ortho / norm))
            if all(float(cand @ other) <= far_cos + 1e-12 for other in others):
                return cand
        raise NarrexError(
            f"infeasible centroid separation: cannot place {c} centroids with "
            f"minimum angle {math.degrees(min_angle):.1f} degrees in {d} dimensions")

    prev: int | None = None
    for s in stages:
        if s not in centroids:
            anchor = centroids[prev] if prev is not None else None
            others = [vec for idx, vec in centroids.items() if idx != prev]
            centroids[s] = place(anchor, others)
        prev = s
    for s in range(c):  # clusters never visited by the storyline
        if s not in centroids:
            centroids[s] = place(None, list(centroids.values()))
    return np.stack([centroids[s] for s in range(c)])


def _monotone_day_offsets(rng: np.random.Generator, n: int, span: int) -> list[int]:
    # jitter below the step size keeps offsets non-decreasing by construction
    step = span / n
    raw = np.arange(n) * step + rng.uniform(0.0, 0.9 * step, size=n)
    return [int(x) for x in np.floor(raw)]


def _pick_expert_rows(rng: np.random.Generator, n: int, frac: float,
                      stage_of: list[int]) -> set[int]:
    """At least one labeled record per stage segment, quota filled uniformly."""
    quota = max(int(round(frac * n)), len(set(stage_of)))
    segments: dict[int, list[int]] = {}
    for i, s in enumerate(stage_of):
        segments.setdefault(s, []).append(i)
    chosen: set[int] = set()
    for s in sorted(segments):
        rows = segments[s]
        chosen.add(int(rows[rng.integers(0, len(rows))]))
    remainder = [i for i in range(n) if i not in chosen]
    extra = quota - len(chosen)
    if extra > 0:
        picked = rng.choice(len(remainder), size=extra, replace=False)
        chosen.update(int(remainder[i]) for i in picked)
    return chosen


def generate(config: SynthConfig) -> GeneratedCorpus:
    """Deterministic planted-narrative corpus for the given seed."""
    config.validate()
    rng = np.random.default_rng(config.rng_seed)
    n, d = config.n, config.d
    min_angle = math.radians(config.min_angle_deg)
    centroids = _drift_centroids(rng, config.c, d, min_angle, config.stages)
    sigma = config.effective_noise_sigma()

    num_stages = len(config.stages)
    stage_of = [i * num_stages // n for i in range(n)]
    vectors = np.empty((n, d), dtype=np.float64)
    for i in range(n):
        base = centroids[config.stages[stage_of[i]]]
        noisy = base + sigma * rng.normal(size=d)
        vectors[i] = _unit(noisy)
    emb = make_embedding_matrix("high", vectors.astype(np.float32))

    offsets = _monotone_day_offsets(rng, n, config.date_span_days)
    location_idx = rng.integers(0, config.num_locations, size=n)
    expert_rows = _pick_expert_rows(rng, n, config.label_fraction, stage_of)

    categories = [f"stage-{k:02d}" for k in range(config.c)]
    locations = [f"site-{k:02d}" for k in range(config.num_locations)]
    width = max(4, len(str(n - 1)))
    records = []
    for i in range(n):
        rid = f"syn-{i:0{width}d}"
        labeled = i in expert_rows
        records.append(ImageRecord(
            id=rid,
            file_ref=f"images/{rid}.jpg",
            location_tag=locations[int(location_idx[i])],
            expert_category=categories[config.stages[stage_of[i]]] if labeled else None,
            expert_date=EPOCH + datetime.timedelta(days=offsets[i]) if labeled else None,
        ))

    embeddings = {"high": emb}
    embedding_files = {"high": "high.nfem"}
    if config.low_dim is not None:
        proj = rng.normal(size=(d, config.low_dim)) / math.sqrt(config.low_dim)
        low = vectors @ proj
        norms = np.linalg.norm(low, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        embeddings["low"] = make_embedding_matrix("low", (low / norms).astype(np.float32))
        embedding_files["low"] = "low.nfem"

    manifest = CorpusManifest(
        categories=categories,
        locations=locations,
        records=records,
        embedding_files=embedding_files,
        embeddings=embeddings,
    )

    timelines: dict[int, Timeline] = {}
    for L in TIMELINE_LENGTHS:
        if L > n:
            continue
        idx = np.rint(np.linspace(0, n - 1, L)).astype(int)
        timelines[L] = Timeline(ids=[records[i].id for i in idx], label="BASELINE")

    return GeneratedCorpus(
        manifest=manifest,
        embedding=emb,
        timelines=timelines,
        noise_sigma=sigma,
        separation_margin=config.separation_margin(),
        stage_of=stage_of,
    )
