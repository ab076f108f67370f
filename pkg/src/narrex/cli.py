"""Command-line pipeline: ingest, propagate, graph, extract, evaluate,
synth, serve.

Every subcommand reads one declarative config (defaults < config file <
flags), writes its JSON artifacts under ``--out`` with fixed names, and
appends step timings to ``<command>.log``.  Artifacts are byte-identical
across re-runs with the same inputs and seeds; logs carry wall times and
are not.

Exit codes: 0 success, 2 configuration or validation error, 3 infeasible
extraction, 4 I/O error, 1 anything else.  Failures print a machine-
readable ``{code, message, detail}`` JSON object to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .config import CONFIG_ENV_VAR, COHERENCE_MODES, KNOWN_SPACES, RunConfig
from .errors import (ConfigError, CorpusFormatError, CorpusIOError,
                     InfeasibleExtractionError, NarrexError, SolverTimeoutError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4
EXIT_OTHER = 1


class _Log:
    def __init__(self, out_dir: Path, command: str):
        self.path = out_dir / f"{command}.log"
        self.lines: list[str] = []
        self.t0 = time.perf_counter()

    def step(self, message: str) -> None:
        self.lines.append(f"[{time.perf_counter() - self.t0:8.3f}s] {message}")

    def flush(self) -> None:
        self.path.write_text("\n".join(self.lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _int_or_none(text: str):
    return None if text.lower() in ("none", "null") else int(text)


def _float_or_none(text: str):
    return None if text.lower() in ("none", "null") else float(text)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("run configuration (every field; flags beat the config file)")
    g.add_argument("--alpha", type=float, help="label-spreading retention, in (0, 1) [default 0.9]")
    g.add_argument("--knn-k", dest="knn_k", type=int, help="affinity neighbors, >= 1 [default 10]")
    g.add_argument("--sigma", type=_float_or_none,
                   help="affinity kernel bandwidth, >= 0, or 'none' for the median heuristic [default none]")
    g.add_argument("--location-weight", dest="location_weight", type=float,
                   help="location one-hot weight in augmented features, >= 0 [default 1.0]")
    g.add_argument("--tol", type=float, help="spreading convergence tolerance, > 0 [default 1e-6]")
    g.add_argument("--max-iter", dest="max_iter", type=int,
                   help="spreading iteration cap, >= 1 [default 1000]")
    g.add_argument("--coherence-mode", dest="coherence_mode", choices=COHERENCE_MODES,
                   help="similarity combination rule [default geometric]")
    g.add_argument("--window", type=_int_or_none,
                   help="max forward positional distance for graph edges, >= 1, or 'none' [default none]")
    g.add_argument("--top-k-out", dest="top_k_out", type=int,
                   help="outgoing edges kept per node, >= 1 [default 20]")
    g.add_argument("--mincover", type=float, help="cluster coverage fraction, in [0, 1] [default 0.2]")
    g.add_argument("--k", dest="K", type=int, help="storyline node count, >= 2 [default 5]")
    g.add_argument("--itf", dest="itf", action="store_true", default=None,
                   help="weight edges by inverse topic frequency [default off]")
    g.add_argument("--timeout", type=float, help="per-extraction solver budget in seconds, > 0 [default 60]")
    g.add_argument("--trials", type=int, help="experiment trials per cell, >= 1 [default 20]")
    g.add_argument("--lengths", type=_int_list,
                   help="comma-separated baseline lengths, each >= 2 [default 5,10,15,20,25,30]")
    g.add_argument("--spaces", type=_str_list,
                   help=f"comma-separated embedding spaces, subset of {{{','.join(KNOWN_SPACES)}}} [default high]")
    g.add_argument("--seed", type=int, help="experiment seed, >= 0 [default 0]")
    g.add_argument("--host", help="serve: listen address [default 127.0.0.1]")
    g.add_argument("--port", type=int, help="serve: listen port, 1..65535 [default 8000]")
    g.add_argument("--cors-origin", dest="cors_origin", help="serve: allowed CORS origin [default *]")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    cfg = RunConfig.from_file(path) if path else RunConfig()
    overrides = {name: getattr(args, name)
                 for name in RunConfig.field_names() if hasattr(args, name)}
    return cfg.with_overrides(overrides)


def _load_propagated(corpus_path: str, log: _Log):
    """Corpus with effective categories/dates and cluster distributions,
    propagating on the fly when the manifest has no cluster matrix."""
    from .corpus import load_corpus, with_clusters
    from .semisup import PropagationParams, propagate_categories, propagate_dates

    manifest = load_corpus(corpus_path)
    log.step(f"loaded corpus: {manifest.n} records, spaces {sorted(manifest.embeddings)}")
    if manifest.cluster_matrix is None:
        cfg: RunConfig = log.cfg  # type: ignore[attr-defined]
        params = PropagationParams(
            location_weight=cfg.location_weight, knn_k=cfg.knn_k, sigma=cfg.sigma,
            alpha=cfg.alpha, tol=cfg.tol, max_iter=cfg.max_iter)
        space = cfg.spaces[0]
        dist = propagate_categories(manifest, manifest.embeddings[space], params)
        propagate_dates(manifest, manifest.embeddings[space], params)
        manifest = with_clusters(manifest, dist.F)
        log.step(f"propagated labels in space {space!r} "
                 f"({dist.iterations} iterations, converged={dist.converged})")
    return manifest


def _build_graph_for(manifest, cfg: RunConfig, space: str, itf: bool):
    from .coherence import apply_itf_weighting, build_graph
    if space not in manifest.embeddings:
        raise ConfigError(f"embedding space {space!r} is not in the corpus")
    g = build_graph(manifest, manifest.embeddings[space], manifest.cluster_matrix,
                    window=cfg.window, top_k_out=cfg.top_k_out, mode=cfg.coherence_mode)
    if itf:
        g = apply_itf_weighting(g, manifest)
    return g


def cmd_ingest(args, cfg: RunConfig, out: Path, log: _Log) -> int:
    from .corpus import load_corpus, write_corpus
    manifest = load_corpus(args.corpus)
    log.step(f"validated corpus: {manifest.n} records, "
             f"{len(manifest.categories)} categories, {len(manifest.locations)} locations")
    write_corpus(manifest, str(out))
    log.step(f"wrote corpus copy to {out}")
    _write_json(out / "ingest.json", {
        "records": manifest.n,
        "categories": manifest.categories,
        "locations": manifest.locations,
        "spaces": sorted(manifest.embeddings),
        "expert_labeled": sum(1 for r in manifest.records if r.expert_category is not None),
    })
    return EXIT_OK


def cmd_propagate(args, cfg: RunConfig, out: Path, log: _Log) -> int:
    from .corpus import load_corpus, with_clusters, write_corpus
    from .semisup import PropagationParams, propagate_categories, propagate_dates

    manifest = load_corpus(args.corpus)
    log.step(f"loaded corpus: {manifest.n} records")
    params = PropagationParams(
        location_weight=cfg.location_weight, knn_k=cfg.knn_k, sigma=cfg.sigma,
        alpha=cfg.alpha, tol=cfg.tol, max_iter=cfg.max_iter)
    space = cfg.spaces[0]
    dist = propagate_categories(manifest, manifest.embeddings[space], params)
    propagate_dates(manifest, manifest.embeddings[space], params)
    log.step(f"spread labels in space {space!r}: {dist.iterations} iterations, "
             f"converged={dist.converged}")
    manifest = with_clusters(manifest, dist.F)
    write_corpus(manifest, str(out))
    log.step(f"wrote propagated corpus to {out}")
    return EXIT_OK


def cmd_graph(args, cfg: RunConfig, out: Path, log: _Log) -> int:
    manifest = _load_propagated(args.corpus, log)
    space = args.space or cfg.spaces[0]
    g = _build_graph_for(manifest, cfg, space, cfg.itf)
    log.step(f"built graph: {g.n} nodes, {len(g.edges)} edges (space {space!r}, itf={cfg.itf})")
    _write_json(out / "graph.json", g.to_json(manifest))
    return EXIT_OK


def cmd_extract(args, cfg: RunConfig, out: Path, log: _Log) -> int:
    from .extract import ExtractionParams, extract_map

    manifest = _load_propagated(args.corpus, log)
    space = args.space or cfg.spaces[0]
    g = _build_graph_for(manifest, cfg, space, cfg.itf)
    log.step(f"built graph: {g.n} nodes, {len(g.edges)} edges")
    params = ExtractionParams(
        source_id=args.source, target_id=args.target, K=cfg.K,
        mincover=cfg.mincover, space_name=space, itf=cfg.itf)
    narrative = extract_map(g, manifest, params, time_limit=cfg.timeout)
    log.step(f"extracted route: mu*={narrative.mu_star:.6f}, "
             f"{narrative.solver_stats.num_edges} model edges, "
             f"{narrative.solver_stats.wall_time_s:.3f}s solve")
    _write_json(out / "map.json", narrative.to_json())
    print(" ".join(narrative.main_route))
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig, out: Path, log: _Log) -> int:
    from .evaluate import Timeline, render_report, run_experiment

    manifest = _load_propagated(args.corpus, log)
    try:
        with open(args.baselines, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise CorpusIOError(f"cannot read baselines file {args.baselines!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"baselines file is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise CorpusFormatError("baselines file must hold a JSON list of timelines")
    baselines = [Timeline.from_json(entry) for entry in raw]
    log.step(f"loaded {len(baselines)} baselines, lengths "
             f"{[len(t.ids) for t in baselines]}")
    report = run_experiment(manifest, baselines, cfg)
    log.step(f"ran {cfg.trials} trials over spaces {cfg.spaces}")
    (out / "report.md").write_text(render_report(report, "markdown"), encoding="utf-8")
    (out / "report.csv").write_text(render_report(report, "csv"), encoding="utf-8")
    (out / "report.json").write_text(render_report(report, "json"), encoding="utf-8")
    log.step("wrote report.md, report.csv, report.json")
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig, out: Path, log: _Log) -> int:
    from .corpus import write_corpus
    from .synth import SynthConfig, generate

    synth_cfg = SynthConfig(
        n=args.n, c=args.c, d=args.d,
        stages=_int_list(args.stages) if args.stages else [],
        noise_sigma=args.noise_sigma, label_fraction=args.label_fraction,
        date_span_days=args.date_span_days, rng_seed=cfg.seed,
        min_angle_deg=args.min_angle_deg, num_locations=args.num_locations,
        low_dim=args.low_dim)
    gen = generate(synth_cfg)
    log.step(f"generated {synth_cfg.n} records, {synth_cfg.c} clusters, "
             f"noise sigma {gen.noise_sigma:.6f} (margin {gen.separation_margin:.6f})")
    write_corpus(gen.manifest, str(out))
    _write_json(out / "baselines.json",
                [gen.timelines[L].to_json() for L in sorted(gen.timelines)])
    log.step(f"wrote corpus and {len(gen.timelines)} ground-truth baselines to {out}")
    return EXIT_OK


def cmd_serve(args, cfg: RunConfig, out: Path, log: _Log) -> int:
    import uvicorn

    from .service import create_app

    manifest = _load_propagated(args.corpus, log)
    app = create_app(manifest, cfg)
    log.step(f"serving on {cfg.host}:{cfg.port}")
    log.flush()
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="narrex", allow_abbrev=False,
        description="Extract coherent image storylines from partially labeled corpora.")
    parser.add_argument("--config", help=f"JSON config file (or ${CONFIG_ENV_VAR})")
    parser.add_argument("--out", default=".", help="artifact directory [default .]")
    _add_config_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", allow_abbrev=False, help="validate a corpus and write a normalized copy")
    p.add_argument("--corpus", required=True, help="path to manifest.json")

    p = sub.add_parser("propagate", allow_abbrev=False, help="spread expert labels and dates to all records")
    p.add_argument("--corpus", required=True)

    p = sub.add_parser("graph", allow_abbrev=False, help="build the coherence graph -> graph.json")
    p.add_argument("--corpus", required=True)
    p.add_argument("--space", help="embedding space [default: first configured]")

    p = sub.add_parser("extract", allow_abbrev=False, help="extract a storyline -> map.json; prints the route")
    p.add_argument("--corpus", required=True)
    p.add_argument("--source", required=True, help="source record id")
    p.add_argument("--target", required=True, help="target record id")
    p.add_argument("--space", help="embedding space [default: first configured]")

    p = sub.add_parser("evaluate", allow_abbrev=False, help="NM-vs-RS trials -> report.md/csv/json")
    p.add_argument("--corpus", required=True)
    p.add_argument("--baselines", required=True, help="JSON list of baseline timelines")

    p = sub.add_parser("synth", allow_abbrev=False, help="generate a planted-narrative corpus + baselines")
    p.add_argument("--n", type=int, default=200, help="corpus size [default 200]")
    p.add_argument("--c", type=int, default=5, help="cluster count, >= 2 [default 5]")
    p.add_argument("--d", type=int, default=32, help="embedding dimension, >= 2 [default 32]")
    p.add_argument("--stages", help="comma-separated cluster sequence [default 0..c-1]")
    p.add_argument("--noise-sigma", dest="noise_sigma", type=_float_or_none, default=None,
                   help="embedding noise, >= 0 [default: separation margin]")
    p.add_argument("--label-fraction", dest="label_fraction", type=float, default=0.3,
                   help="expert-labeled fraction, in (0, 1] [default 0.3]")
    p.add_argument("--date-span-days", dest="date_span_days", type=int, default=365,
                   help="corpus date span [default 365]")
    p.add_argument("--min-angle-deg", dest="min_angle_deg", type=float, default=35.0,
                   help="minimum centroid separation angle [default 35]")
    p.add_argument("--num-locations", dest="num_locations", type=int, default=3,
                   help="location vocabulary size [default 3]")
    p.add_argument("--low-dim", dest="low_dim", type=int, default=None,
                   help="also emit a low-dimensional space of this size [default off]")

    p = sub.add_parser("serve", allow_abbrev=False, help="run the HTTP API over a corpus")
    p.add_argument("--corpus", required=True)
    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "propagate": cmd_propagate,
    "graph": cmd_graph,
    "extract": cmd_extract,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "serve": cmd_serve,
}


def _error_json(code: str, message: str, detail) -> str:
    return json.dumps({"code": code, "message": message, "detail": detail})


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        log = _Log(out, args.command)
        log.cfg = cfg  # type: ignore[attr-defined]
        log.step(f"config: {json.dumps(cfg.to_json(), sort_keys=True)}")
        code = _COMMANDS[args.command](args, cfg, out, log)
        log.step("done")
        log.flush()
        return code
    except ConfigError as exc:
        print(_error_json("config", str(exc), {}), file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleExtractionError as exc:
        print(_error_json("infeasible", str(exc), exc.report), file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverTimeoutError as exc:
        print(_error_json("timeout", str(exc), {"incumbent": exc.incumbent}), file=sys.stderr)
        return EXIT_OTHER
    except (CorpusIOError, OSError) as exc:
        print(_error_json("io", str(exc), {}), file=sys.stderr)
        return EXIT_IO
    except CorpusFormatError as exc:
        print(_error_json("corpus-format", str(exc), {}), file=sys.stderr)
        return EXIT_CONFIG
    except NarrexError as exc:
        print(_error_json("validation", str(exc), {}), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # surface anything unexpected as machine-readable JSON
        print(_error_json("internal", f"{type(exc).__name__}: {exc}", {}), file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
