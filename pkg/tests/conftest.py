import datetime

import numpy as np
import pytest

from narrex.corpus import (CorpusManifest, ImageRecord, make_embedding_matrix,
                           with_clusters)


def unit_rows(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def tiny_corpus(vectors, *, categories=("alpha", "beta"), locations=("north",),
                dates=None, expert=None, location_tags=None, clusters=None,
                space="high"):
    """Hand-built corpus over explicit embedding rows.

    ``expert`` maps row -> category name; ``dates`` defaults to consecutive
    days so temporal order equals row order.
    """
    data = unit_rows(np.asarray(vectors, dtype=np.float64)).astype(np.float32)
    n = data.shape[0]
    dates = dates or [datetime.date(2020, 1, 1) + datetime.timedelta(days=i) for i in range(n)]
    expert = expert or {}
    records = []
    for i in range(n):
        records.append(ImageRecord(
            id=f"img-{i:03d}",
            expert_category=expert.get(i),
            expert_date=dates[i],
            location_tag=None if location_tags is None else location_tags[i],
        ))
    manifest = CorpusManifest(
        categories=list(categories),
        locations=list(locations),
        records=records,
        embedding_files={space: f"{space}.nfem"},
        embeddings={space: make_embedding_matrix(space, data)},
    )
    if clusters is not None:
        manifest = with_clusters(manifest, np.asarray(clusters, dtype=np.float64))
    return manifest


@pytest.fixture(scope="session")
def planted_corpus():
    """Small propagated synthetic corpus shared by the slower suites."""
    from narrex.config import RunConfig
    from narrex.corpus import with_clusters as attach
    from narrex.semisup import PropagationParams, propagate_categories, propagate_dates
    from narrex.synth import SynthConfig, generate

    gen = generate(SynthConfig(n=80, c=4, d=16, rng_seed=5, label_fraction=0.35))
    corpus = gen.manifest
    params = PropagationParams(knn_k=16, location_weight=0.0)
    dist = propagate_categories(corpus, corpus.embeddings["high"], params)
    propagate_dates(corpus, corpus.embeddings["high"], params)
    corpus = attach(corpus, dist.F)
    cfg = RunConfig(knn_k=16, location_weight=0.0, top_k_out=40)
    return corpus, gen, cfg
