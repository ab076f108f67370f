"""Coherence-driven storyline extraction from partially labeled image corpora.

The pipeline: load a corpus of dated, partly expert-labeled images
(``corpus``), spread labels and dates to the rest (``semisup``), score
temporal edges by embedding and topic agreement (``coherence``), extract
the max-min-coherence route between two chosen images under a cluster
coverage constraint (``extract``), and compare against random-sampling
baselines with DTW alignment statistics (``evaluate``).  ``synth`` builds
corpora with a planted storyline for testing; ``cli`` and ``service``
wrap everything for batch and interactive use.
"""

from .coherence import (CoherenceGraph, apply_itf_weighting, build_graph,
                        coherence, combine_coherence, cosine_similarity,
                        itf_factors, temporal_node_order, topic_similarity)
from .config import CONFIG_ENV_VAR, RunConfig
from .corpus import (CorpusManifest, EmbeddingMatrix, ImageRecord, load_corpus,
                     make_embedding_matrix, read_matrix, with_clusters,
                     write_corpus, write_matrix)
from .errors import (ConfigError, CorpusFormatError, CorpusIOError,
                     GraphBuildError, InfeasibleExtractionError, NarrexError,
                     SolverTimeoutError, UnreachableNodeError)
from .evaluate import (DtwAlignment, ExperimentCell, ExperimentReport, Timeline,
                       WelchResult, dtw, mean_path_similarity, parse_csv_report,
                       random_sample_timeline, render_report, run_experiment,
                       welch_t_test)
from .extract import (ExtractionParams, FeasibilityReport, NarrativeMap,
                      SolverStats, check_feasibility, extract_main_route,
                      extract_map, required_coverage)
from .milp import MilpInfeasible, MilpProblem, MilpResult, solve_milp
from .semisup import (AffinityGraph, ClusterDistribution, LabelSeed,
                      PropagationParams, build_affinity,
                      build_augmented_features, closed_form_spread,
                      propagate_categories, propagate_dates, spread_labels)
from .service import create_app
from .synth import GeneratedCorpus, SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "AffinityGraph",
    "ClusterDistribution",
    "CoherenceGraph",
    "ConfigError",
    "CONFIG_ENV_VAR",
    "CorpusFormatError",
    "CorpusIOError",
    "CorpusManifest",
    "DtwAlignment",
    "EmbeddingMatrix",
    "ExperimentCell",
    "ExperimentReport",
    "ExtractionParams",
    "FeasibilityReport",
    "GeneratedCorpus",
    "GraphBuildError",
    "ImageRecord",
    "InfeasibleExtractionError",
    "LabelSeed",
    "MilpInfeasible",
    "MilpProblem",
    "MilpResult",
    "NarrativeMap",
    "NarrexError",
    "PropagationParams",
    "RunConfig",
    "SolverStats",
    "SolverTimeoutError",
    "SynthConfig",
    "Timeline",
    "UnreachableNodeError",
    "WelchResult",
    "apply_itf_weighting",
    "build_affinity",
    "build_augmented_features",
    "build_graph",
    "check_feasibility",
    "closed_form_spread",
    "coherence",
    "combine_coherence",
    "cosine_similarity",
    "create_app",
    "dtw",
    "extract_main_route",
    "extract_map",
    "generate",
    "itf_factors",
    "load_corpus",
    "make_embedding_matrix",
    "mean_path_similarity",
    "parse_csv_report",
    "propagate_categories",
    "propagate_dates",
    "random_sample_timeline",
    "read_matrix",
    "render_report",
    "required_coverage",
    "run_experiment",
    "solve_milp",
    "spread_labels",
    "temporal_node_order",
    "topic_similarity",
    "welch_t_test",
    "with_clusters",
    "write_corpus",
    "write_matrix",
]
