"""Quantitative comparison of extracted storylines against random sampling.

Metrics follow a dynamic-time-warping protocol: sequences of image
embeddings are aligned with local cost 1 - cosine similarity (unnormalized
path sum), and each alignment also yields the mean cosine similarity over
matched pairs.  Extracted (NM) and randomly sampled (RS) timelines are both
scored against a fixed baseline timeline per length, over independent
seeded trials, and compared with Welch t-tests.

Per-trial NM variation: re-running extraction with a shuffled dataset only
moves tie-breaks in a deterministic engine, so each trial seed permutes the
candidate ordering used for equal-coherence tie-breaking during graph
pruning (and seeds the RS draw).  The report carries this note.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .coherence import apply_itf_weighting, build_graph, coherence, temporal_node_order
from .config import RunConfig
from .corpus import CorpusManifest, EmbeddingMatrix
from .errors import InfeasibleExtractionError, NarrexError, SolverTimeoutError
from .extract import ExtractionParams, extract_map

TIMELINE_LABELS = ("NM", "RS", "BASELINE")

SHUFFLE_NOTE = ("per-trial variation: trial seeds permute equal-coherence tie-breaking "
                "during graph pruning and seed the random-sampling draw")
EDGE_COHERENCE_NOTE = ("mean_edge_coherence: mean coherence over consecutive timeline "
                       "pairs, as defined by this artifact")


@dataclass
class Timeline:
    ids: list[str]
    label: str = "BASELINE"

    def __post_init__(self) -> None:
        if self.label not in TIMELINE_LABELS:
            raise NarrexError(f"timeline label must be one of {TIMELINE_LABELS}, got {self.label!r}")
        if not self.ids:
            raise NarrexError("timeline must contain at least one record id")

    def validate(self, corpus: CorpusManifest) -> None:
        order_pos = {row: p for p, row in enumerate(temporal_node_order(corpus))}
        positions = []
        for rid in self.ids:
            try:
                positions.append(order_pos[corpus.row_of(rid)])
            except KeyError:
                raise NarrexError(f"timeline references unknown record id {rid!r}") from None
        if self.label in ("NM", "RS"):
            if any(b <= a for a, b in zip(positions, positions[1:])):
                raise NarrexError(f"{self.label} timeline must be strictly increasing in temporal order")

    def to_json(self) -> dict:
        return {"ids": self.ids, "label": self.label, "length": len(self.ids)}

    @classmethod
    def from_json(cls, raw: dict) -> "Timeline":
        tl = cls(ids=list(raw["ids"]), label=raw.get("label", "BASELINE"))
        if "length" in raw and raw["length"] != len(tl.ids):
            raise NarrexError(
                f"timeline declares length {raw['length']} but holds {len(tl.ids)} ids")
        return tl


@dataclass
class DtwAlignment:
    path: list[tuple[int, int]]
    distance: float
    mean_similarity: float

    def to_json(self) -> dict:
        return {
            "path": [list(p) for p in self.path],
            "distance": self.distance,
            "mean_similarity": self.mean_similarity,
        }


def _unit_rows(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise NarrexError(f"{name} must be a non-empty 2-D embedding sequence")
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise NarrexError(f"{name} contains a zero embedding")
    return x / norms


def dtw(a: np.ndarray, b: np.ndarray) -> DtwAlignment:
    """Optimal monotone alignment of two embedding sequences.

    Local cost 1 - cos; the distance is the plain sum over the optimal
    path.  Backtracking breaks ties toward the diagonal step, then (1,0),
    then (0,1).
    """
    ua = _unit_rows(a, "first sequence")
    ub = _unit_rows(b, "second sequence")
    if ua.shape[1] != ub.shape[1]:
        raise NarrexError(
            f"sequence dimensions differ: {ua.shape[1]} vs {ub.shape[1]}")
    sim = np.clip(ua @ ub.T, -1.0, 1.0)
    cost = 1.0 - sim
    n, m = cost.shape
    acc = np.full((n, m), np.inf)
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        row_prev = acc[i - 1]
        row_cur = acc[i]
        for j in range(1, m):
            row_cur[j] = cost[i, j] + min(row_prev[j - 1], row_prev[j], row_cur[j - 1])

    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
            if acc[i - 1, j - 1] == best:
                i, j = i - 1, j - 1
            elif acc[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    mean_sim = float(np.mean([sim[i, j] for i, j in path]))
    return DtwAlignment(path=path, distance=float(acc[n - 1, m - 1]), mean_similarity=mean_sim)


def mean_path_similarity(alignment, a: np.ndarray, b: np.ndarray) -> float:
    """Mean cosine similarity over an alignment's matched pairs."""
    path = alignment.path if isinstance(alignment, DtwAlignment) else list(alignment)
    ua = _unit_rows(a, "first sequence")
    ub = _unit_rows(b, "second sequence")
    sims = [float(np.clip(ua[i] @ ub[j], -1.0, 1.0)) for i, j in path]
    return float(np.mean(sims))


def random_sample_timeline(corpus: CorpusManifest, source_id: str, target_id: str,
                           L: int, rng_seed) -> Timeline:
    """Endpoints fixed, L-2 interior records drawn uniformly, sorted temporally."""
    if L < 2:
        raise NarrexError(f"timeline length must be >= 2, got {L}")
    order = temporal_node_order(corpus)
    pos_of = {row: p for p, row in enumerate(order)}
    try:
        s_pos = pos_of[corpus.row_of(source_id)]
        t_pos = pos_of[corpus.row_of(target_id)]
    except KeyError as exc:
        raise NarrexError(f"unknown record id {exc.args[0]!r}") from None
    if s_pos >= t_pos:
        raise NarrexError("source must precede target in temporal order")
    interior = list(range(s_pos + 1, t_pos))
    if len(interior) < L - 2:
        raise NarrexError(
            f"need {L - 2} interior records between source and target, only {len(interior)} exist")
    rng = np.random.default_rng(rng_seed)
    picked = sorted(rng.choice(len(interior), size=L - 2, replace=False).tolist())
    rows = [order[s_pos]] + [order[interior[i]] for i in picked] + [order[t_pos]]
    return Timeline(ids=[corpus.records[r].id for r in rows], label="RS")


# --- Welch's t-test ---------------------------------------------------------

_BETACF_EPS = 1e-14
_BETACF_TINY = 1e-300
_BETACF_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    # continued fraction for the incomplete beta function (modified Lentz)
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_TINY:
        d = _BETACF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise NarrexError("incomplete beta continued fraction failed to converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate to well under 1e-8 for the t-distribution range."""
    if not 0.0 <= x <= 1.0:
        raise NarrexError(f"incomplete beta argument x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


@dataclass
class WelchResult:
    t: float
    df: float
    p: float

    def to_json(self) -> dict:
        return {"t": self.t, "df": self.df, "p": self.p}


def welch_t_test(xs, ys) -> WelchResult:
    """Unequal-variance t statistic, Welch-Satterthwaite df, two-sided p."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.size < 2 or y.size < 2:
        raise NarrexError("each sample needs at least 2 observations")
    nx, ny = x.size, y.size
    vx, vy = float(np.var(x, ddof=1)), float(np.var(y, ddof=1))
    mean_diff = float(np.mean(x) - np.mean(y))
    if vx == 0.0 and vy == 0.0:
        if mean_diff == 0.0:
            return WelchResult(t=0.0, df=float(nx + ny - 2), p=1.0)
        return WelchResult(t=math.copysign(math.inf, mean_diff),
                           df=float(nx + ny - 2), p=0.0)
    se2 = vx / nx + vy / ny
    t = mean_diff / math.sqrt(se2)
    df = se2 ** 2 / ((vx / nx) ** 2 / (nx - 1) + (vy / ny) ** 2 / (ny - 1))
    # two-sided p from the t CDF: P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return WelchResult(t=t, df=df, p=min(1.0, max(0.0, p)))


# --- experiment harness -----------------------------------------------------

_CELL_FLOAT_FIELDS = (
    "nm_distance_mean", "nm_distance_sd", "rs_distance_mean", "rs_distance_sd",
    "nm_similarity_mean", "nm_similarity_sd", "rs_similarity_mean", "rs_similarity_sd",
    "p_distance", "p_similarity", "nm_mean_edge_coherence", "rs_mean_edge_coherence",
)


@dataclass
class ExperimentCell:
    length: int
    space: str
    trials: int
    nm_distance_mean: float | None = None
    nm_distance_sd: float | None = None
    rs_distance_mean: float | None = None
    rs_distance_sd: float | None = None
    nm_similarity_mean: float | None = None
    nm_similarity_sd: float | None = None
    rs_similarity_mean: float | None = None
    rs_similarity_sd: float | None = None
    p_distance: float | None = None
    p_similarity: float | None = None
    nm_mean_edge_coherence: float | None = None
    rs_mean_edge_coherence: float | None = None
    nm_failures: int = 0
    failure_reasons: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"length": self.length, "space": self.space, "trials": self.trials}
        for name in _CELL_FLOAT_FIELDS:
            out[name] = getattr(self, name)
        out["nm_failures"] = self.nm_failures
        out["failure_reasons"] = self.failure_reasons
        return out

    @classmethod
    def from_json(cls, raw: dict) -> "ExperimentCell":
        return cls(**raw)


@dataclass
class ExperimentReport:
    cells: list[ExperimentCell]
    config: dict
    notes: list[str] = field(default_factory=lambda: [SHUFFLE_NOTE, EDGE_COHERENCE_NOTE])

    def to_json(self) -> dict:
        return {
            "cells": [c.to_json() for c in self.cells],
            "config": self.config,
            "notes": self.notes,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "ExperimentReport":
        return cls(
            cells=[ExperimentCell.from_json(c) for c in raw["cells"]],
            config=raw.get("config", {}),
            notes=raw.get("notes", []),
        )


def _mean_sd(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    sd = float(np.std(arr, ddof=1)) if arr.size >= 2 else 0.0
    return float(np.mean(arr)), sd


def _timeline_rows(corpus: CorpusManifest, ids: list[str]) -> list[int]:
    return [corpus.row_of(rid) for rid in ids]


def _sequence(emb: EmbeddingMatrix, rows: list[int]) -> np.ndarray:
    return emb.data[rows]


def _mean_edge_coherence(corpus: CorpusManifest, emb: EmbeddingMatrix,
                         ids: list[str], mode: str) -> float:
    rows = _timeline_rows(corpus, ids)
    vals = [coherence(u, v, emb, corpus.cluster_matrix, mode=mode)
            for u, v in zip(rows, rows[1:])]
    return float(np.mean(vals)) if vals else 0.0


def _graph_fingerprint(g, params: ExtractionParams) -> str:
    h = hashlib.sha256()
    for u, v, coh, _, _ in g.edges:
        h.update(f"{u},{v},{coh!r};".encode())
    h.update(json.dumps(params.to_json(), sort_keys=True).encode())
    return h.hexdigest()


def run_experiment(corpus: CorpusManifest, baselines: list[Timeline],
                   config: RunConfig) -> ExperimentReport:
    """NM-vs-RS comparison over seeded trials, one report cell per
    (baseline length, embedding space).

    Each trial rebuilds the coherence graph under that trial's tie-break
    permutation; extraction is memoized on the resulting graph so trials
    whose permutations change no tie resolve without a second solve.
    Infeasible or timed-out extractions are recorded as failures and
    excluded from the statistics.
    """
    config.validate()
    if corpus.cluster_matrix is None:
        raise NarrexError("experiments need cluster distributions; run propagation first")
    for rec in corpus.records:
        if rec.effective_category is None or rec.effective_date is None:
            raise NarrexError(
                f"record {rec.id!r} lacks an effective category or date; run propagation first")
    for space in config.spaces:
        if space not in corpus.embeddings:
            raise NarrexError(f"embedding space {space!r} is not loaded")
    for tl in baselines:
        tl.validate(corpus)
    by_length: dict[int, list[Timeline]] = {}
    for tl in baselines:
        by_length.setdefault(len(tl.ids), []).append(tl)
    missing = [L for L in config.lengths if L not in by_length]
    if missing:
        raise NarrexError(f"no baseline timeline of length {missing[0]}; "
                          f"configured lengths are {config.lengths}")

    n = corpus.n
    cells: list[ExperimentCell] = []
    extraction_cache: dict[str, list[str] | Exception] = {}

    ordered = [(L, tl) for L in config.lengths for tl in by_length[L]]
    for space_idx, space in enumerate(config.spaces):
        emb = corpus.embeddings[space]
        for L, baseline in ordered:
            base_rows = _timeline_rows(corpus, baseline.ids)
            base_seq = _sequence(emb, base_rows)
            source_id, target_id = baseline.ids[0], baseline.ids[-1]
            params = ExtractionParams(
                source_id=source_id, target_id=target_id, K=L,
                mincover=config.mincover, space_name=space, itf=config.itf)

            nm_dist: list[float] = []
            nm_sim: list[float] = []
            rs_dist: list[float] = []
            rs_sim: list[float] = []
            nm_coh: list[float] = []
            rs_coh: list[float] = []
            failures: list[str] = []

            for trial in range(config.trials):
                trial_key = [config.seed, space_idx, L, trial]
                perm = np.random.default_rng(trial_key).permutation(n)
                g = build_graph(
                    corpus, emb, corpus.cluster_matrix,
                    window=config.window, top_k_out=config.top_k_out,
                    mode=config.coherence_mode, tiebreak_rank=perm)
                if config.itf:
                    g = apply_itf_weighting(g, corpus)

                fp = _graph_fingerprint(g, params)
                if fp not in extraction_cache:
                    try:
                        narrative = extract_map(g, corpus, params, time_limit=config.timeout)
                        extraction_cache[fp] = narrative.main_route
                    except (InfeasibleExtractionError, SolverTimeoutError) as exc:
                        extraction_cache[fp] = exc
                cached = extraction_cache[fp]

                if isinstance(cached, Exception):
                    failures.append(f"trial {trial}: {cached}")
                else:
                    route_seq = _sequence(emb, _timeline_rows(corpus, cached))
                    al = dtw(route_seq, base_seq)
                    nm_dist.append(al.distance)
                    nm_sim.append(al.mean_similarity)
                    nm_coh.append(_mean_edge_coherence(corpus, emb, cached, config.coherence_mode))

                rs = random_sample_timeline(
                    corpus, source_id, target_id, L, rng_seed=trial_key + [1])
                rs_seq = _sequence(emb, _timeline_rows(corpus, rs.ids))
                al = dtw(rs_seq, base_seq)
                rs_dist.append(al.distance)
                rs_sim.append(al.mean_similarity)
                rs_coh.append(_mean_edge_coherence(corpus, emb, rs.ids, config.coherence_mode))

            cell = ExperimentCell(length=L, space=space, trials=config.trials,
                                  nm_failures=len(failures), failure_reasons=failures)
            if rs_dist:
                cell.rs_distance_mean, cell.rs_distance_sd = _mean_sd(rs_dist)
                cell.rs_similarity_mean, cell.rs_similarity_sd = _mean_sd(rs_sim)
                cell.rs_mean_edge_coherence = float(np.mean(rs_coh))
            if nm_dist:
                cell.nm_distance_mean, cell.nm_distance_sd = _mean_sd(nm_dist)
                cell.nm_similarity_mean, cell.nm_similarity_sd = _mean_sd(nm_sim)
                cell.nm_mean_edge_coherence = float(np.mean(nm_coh))
            if len(nm_dist) >= 2 and len(rs_dist) >= 2:
                cell.p_distance = welch_t_test(nm_dist, rs_dist).p
                cell.p_similarity = welch_t_test(nm_sim, rs_sim).p
            cells.append(cell)

    return ExperimentReport(cells=cells, config=config.to_json())


# --- report rendering -------------------------------------------------------

def _fmt(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def _render_markdown(report: ExperimentReport) -> str:
    lines = ["# Storyline evaluation", ""]
    for note in report.notes:
        lines.append(f"- {note}")
    if report.notes:
        lines.append("")
    spaces = sorted({c.space for c in report.cells},
                    key=lambda s: report.config.get("spaces", sorted({c.space for c in report.cells})).index(s)
                    if s in report.config.get("spaces", []) else 0)
    if not report.cells:
        lines.append("| L |")
        lines.append("|---|")
        lines.append("")
        return "\n".join(lines)
    header = ["L"]
    for space in spaces:
        for metric in ("distance", "similarity"):
            header += [f"{space} NM {metric}", f"{space} RS {metric}", f"{space} p ({metric})"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    by_key = {(c.length, c.space): c for c in report.cells}
    for length in sorted({c.length for c in report.cells}):
        row = [str(length)]
        for space in spaces:
            c = by_key.get((length, space))
            if c is None:
                row += ["-"] * 6
                continue
            for metric in ("distance", "similarity"):
                mean_n = getattr(c, f"nm_{metric}_mean")
                sd_n = getattr(c, f"nm_{metric}_sd")
                mean_r = getattr(c, f"rs_{metric}_mean")
                sd_r = getattr(c, f"rs_{metric}_sd")
                nm_txt = "-" if mean_n is None else f"{_fmt(mean_n)} ± {_fmt(sd_n)}"
                rs_txt = "-" if mean_r is None else f"{_fmt(mean_r)} ± {_fmt(sd_r)}"
                row += [nm_txt, rs_txt, _fmt(getattr(c, f"p_{metric}"), 6)]
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    return "\n".join(lines)


_CSV_COLUMNS = ("length", "space", "trials") + _CELL_FLOAT_FIELDS + (
    "nm_failures", "failure_reasons")


def _render_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for cell in report.cells:
        row = []
        for col in _CSV_COLUMNS:
            value = getattr(cell, col)
            if col == "failure_reasons":
                row.append(json.dumps(value))
            elif value is None:
                row.append("")
            elif isinstance(value, float):
                row.append(repr(value))  # repr round-trips exactly
            else:
                row.append(str(value))
        writer.writerow(row)
    return buf.getvalue()


def parse_csv_report(text: str) -> ExperimentReport:
    """Rebuild report cells from CSV output (numeric fields are lossless)."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or tuple(rows[0]) != _CSV_COLUMNS:
        raise NarrexError("CSV report header does not match the expected columns")
    cells = []
    for row in rows[1:]:
        raw: dict = dict(zip(_CSV_COLUMNS, row))
        raw["length"] = int(raw["length"])
        raw["trials"] = int(raw["trials"])
        raw["nm_failures"] = int(raw["nm_failures"])
        raw["failure_reasons"] = json.loads(raw["failure_reasons"])
        for name in _CELL_FLOAT_FIELDS:
            raw[name] = None if raw[name] == "" else float(raw[name])
        cells.append(ExperimentCell(**raw))
    return ExperimentReport(cells=cells, config={}, notes=[])


def render_report(report: ExperimentReport, fmt: str = "markdown") -> str:
    if fmt == "markdown":
        return _render_markdown(report)
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "json":
        return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
    raise NarrexError(f"unknown report format {fmt!r}")
