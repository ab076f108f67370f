"""Exception hierarchy shared across the pipeline."""
from __future__ import annotations


class NarrexError(Exception):
    """Base class for all engine errors."""


class CorpusFormatError(NarrexError):
    """Manifest or embedding file violates the corpus contract."""


class CorpusIOError(NarrexError):
    """Filesystem failure while reading or writing corpus artifacts."""


class ConfigError(NarrexError):
    """Run configuration outside its declared domain."""


class GraphBuildError(NarrexError):
    """Affinity or coherence graph cannot be constructed."""


class UnreachableNodeError(NarrexError):
    """A node received no label mass during spreading."""

    def __init__(self, row: int):
        self.row = row
        super().__init__(f"node at row {row} is unreachable from every seed")


class InfeasibleExtractionError(NarrexError):
    """Extraction constraints cannot be satisfied; carries a structured report."""

    def __init__(self, report: dict):
        self.report = report
        failed = ", ".join(report.get("failed_families", [])) or "unknown"
        super().__init__(f"infeasible extraction (failed constraint families: {failed})")


class SolverTimeoutError(NarrexError):
    """Exact solve did not finish inside the time budget."""

    def __init__(self, message: str, incumbent=None):
        self.incumbent = incumbent
        super().__init__(message)
