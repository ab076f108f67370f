"""Planted-corpus generator: geometry, labels, dates, and determinism."""
import math

import numpy as np
import pytest

from narrex.errors import NarrexError
from narrex.synth import TIMELINE_LENGTHS, SynthConfig, generate


@pytest.mark.parametrize("bad", [
    dict(c=1),
    dict(d=1),
    dict(c=3, stages=[0, 3]),
    dict(label_fraction=0.0),
    dict(label_fraction=1.5),
    dict(n=10, c=5, label_fraction=0.2),  # quota of 2 cannot seed 5 clusters
    dict(n=3, c=5),
    dict(date_span_days=0),
    dict(min_angle_deg=0.0),
    dict(min_angle_deg=180.0),
    dict(num_locations=0),
    dict(low_dim=1),
])
def test_config_validation_rejects(bad):
    with pytest.raises(NarrexError):
        SynthConfig(**bad).validate()


def test_default_stages_visit_every_cluster_in_order():
    cfg = SynthConfig(c=4)
    assert cfg.stages == [0, 1, 2, 3]
    cfg.validate()


def test_separation_margin_formula():
    cfg = SynthConfig(d=64, min_angle_deg=40.0)
    assert cfg.separation_margin() == pytest.approx(math.radians(40.0) / (2 * 8.0))
    assert cfg.effective_noise_sigma() == cfg.separation_margin()
    assert SynthConfig(noise_sigma=0.25).effective_noise_sigma() == 0.25


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_zero_noise_collapses_each_stage_to_its_centroid():
    gen = generate(SynthConfig(n=40, c=4, d=16, noise_sigma=0.0, rng_seed=1))
    rows = _unit_rows(np.asarray(gen.embedding.data, dtype=np.float64))
    stage = np.asarray(gen.stage_of)
    for s in range(4):
        block = rows[stage == s]
        assert np.all(block == block[0])  # identical records within a stage
    sims = rows @ rows.T
    within = sims[np.equal.outer(stage, stage)]
    between = sims[~np.equal.outer(stage, stage)]
    assert within.min() > 1.0 - 1e-6
    assert between.max() < math.cos(math.radians(35.0)) + 1e-6


def test_adjacent_stages_sit_closer_than_distant_ones():
    cfg = SynthConfig(n=50, c=5, d=24, noise_sigma=0.0, rng_seed=3, min_angle_deg=35.0)
    gen = generate(cfg)
    rows = _unit_rows(np.asarray(gen.embedding.data, dtype=np.float64))
    stage = np.asarray(gen.stage_of)
    reps = np.stack([rows[stage == s][0] for s in range(5)])
    theta = math.radians(35.0)
    adj = min(1.3 * theta, math.pi / 2)
    far_cos = math.cos(min(1.7 * theta, math.pi * 0.6))
    for s in range(4):
        assert float(reps[s] @ reps[s + 1]) == pytest.approx(math.cos(adj), abs=1e-5)
    for a in range(5):
        for b in range(a + 2, 5):
            assert float(reps[a] @ reps[b]) <= far_cos + 1e-5


def test_noise_at_margin_keeps_stages_separable():
    cfg = SynthConfig(n=120, c=4, d=16, rng_seed=7)  # sigma defaults to the margin
    gen = generate(cfg)
    assert gen.noise_sigma == pytest.approx(cfg.separation_margin())
    rows = _unit_rows(np.asarray(gen.embedding.data, dtype=np.float64))
    stage = np.asarray(gen.stage_of)
    sims = rows @ rows.T
    same = np.equal.outer(stage, stage) & ~np.eye(len(rows), dtype=bool)
    within_mean = sims[same].mean()
    between_mean = sims[~np.equal.outer(stage, stage)].mean()
    assert within_mean > between_mean + 0.05


def test_expert_labels_cover_every_stage_and_match_planted():
    cfg = SynthConfig(n=60, c=4, d=8, rng_seed=2, label_fraction=0.25)
    gen = generate(cfg)
    labeled = [i for i, r in enumerate(gen.manifest.records) if r.expert_category]
    assert len(labeled) == max(round(0.25 * 60), 4)
    seen_stages = set()
    for i in labeled:
        rec = gen.manifest.records[i]
        planted = f"stage-{cfg.stages[gen.stage_of[i]]:02d}"
        assert rec.expert_category == planted
        assert rec.expert_date is not None
        seen_stages.add(gen.stage_of[i])
    assert seen_stages == set(range(4))
    for i, rec in enumerate(gen.manifest.records):
        if i not in labeled:
            assert rec.expert_category is None and rec.expert_date is None


def test_dates_are_monotone_in_record_order():
    gen = generate(SynthConfig(n=80, c=4, d=8, rng_seed=11, label_fraction=1.0))
    dates = [r.expert_date for r in gen.manifest.records]
    assert all(d is not None for d in dates)
    assert all(a <= b for a, b in zip(dates, dates[1:]))
    span = (dates[-1] - dates[0]).days
    assert 0 < span <= 365


def test_stage_segments_are_contiguous_and_complete():
    gen = generate(SynthConfig(n=33, c=5, d=8, rng_seed=4))
    stage = gen.stage_of
    assert len(stage) == 33
    assert all(a <= b for a, b in zip(stage, stage[1:]))
    assert set(stage) == set(range(5))


def test_storyline_may_revisit_a_cluster():
    cfg = SynthConfig(n=30, c=3, d=8, stages=[0, 1, 0], noise_sigma=0.0,
                      rng_seed=9, label_fraction=1.0)
    gen = generate(cfg)
    cats = [r.expert_category for r in gen.manifest.records]
    first = cats[: 30 // 3]
    last = cats[-(30 // 3):]
    assert set(first) == {"stage-00"} == set(last)
    rows = _unit_rows(np.asarray(gen.embedding.data, dtype=np.float64))
    assert np.allclose(rows[0], rows[-1], atol=1e-6)  # same centroid both visits


def test_generation_is_deterministic():
    cfg = SynthConfig(n=50, c=4, d=16, rng_seed=6)
    a, b = generate(cfg), generate(cfg)
    assert np.array_equal(np.asarray(a.embedding.data), np.asarray(b.embedding.data))
    for ra, rb in zip(a.manifest.records, b.manifest.records):
        assert (ra.id, ra.location_tag, ra.expert_category, ra.expert_date) == \
            (rb.id, rb.location_tag, rb.expert_category, rb.expert_date)
    assert {L: t.ids for L, t in a.timelines.items()} == \
        {L: t.ids for L, t in b.timelines.items()}
    c = generate(SynthConfig(n=50, c=4, d=16, rng_seed=66))
    assert not np.array_equal(np.asarray(a.embedding.data), np.asarray(c.embedding.data))


def test_ground_truth_timelines():
    # fully labeled so the timelines validate without a propagation pass
    gen = generate(SynthConfig(n=25, c=4, d=8, rng_seed=5, label_fraction=1.0))
    assert set(gen.timelines) == {L for L in TIMELINE_LENGTHS if L <= 25}
    ids = [r.id for r in gen.manifest.records]
    for L, tl in gen.timelines.items():
        assert tl.label == "BASELINE"
        want = [ids[int(i)] for i in np.rint(np.linspace(0, 24, L)).astype(int)]
        assert tl.ids == want
        assert tl.ids[0] == ids[0] and tl.ids[-1] == ids[-1]
        tl.validate(gen.manifest)


def test_low_dim_sidecar():
    gen = generate(SynthConfig(n=20, c=3, d=16, rng_seed=8, low_dim=6))
    assert set(gen.manifest.embeddings) == {"high", "low"}
    low = np.asarray(gen.manifest.embeddings["low"].data, dtype=np.float64)
    assert low.shape == (20, 6)
    assert np.allclose(np.linalg.norm(low, axis=1), 1.0, atol=1e-5)
    assert gen.manifest.embedding_files["low"] == "low.nfem"
    plain = generate(SynthConfig(n=20, c=3, d=16, rng_seed=8))
    assert set(plain.manifest.embeddings) == {"high"}


def test_records_carry_locations_and_file_refs():
    gen = generate(SynthConfig(n=15, c=3, d=8, rng_seed=10, num_locations=2))
    assert gen.manifest.locations == ["site-00", "site-01"]
    for rec in gen.manifest.records:
        assert rec.location_tag in gen.manifest.locations
        assert rec.file_ref == f"images/{rec.id}.jpg"
