"""Corpus loading, validation, and persistence.

The on-disk layout is a JSON manifest plus sidecar binary matrices.  The
manifest carries the category/location vocabularies and one entry per image;
embedding matrices live in a compact binary container (magic ``NFEM``) so a
few hundred 256-float rows stay small and bit-exact across round trips.

Row order in every matrix follows the manifest's record order, fixed at load
time; all downstream modules index by that row order.
"""
from __future__ import annotations

import datetime
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import CorpusFormatError, CorpusIOError

MATRIX_MAGIC = b"NFEM"
EMBEDDING_SPACES = ("high", "low")
CLUSTERS_KEY = "clusters"
NORM_TOL = 1e-4


def _parse_date(value: str, *, context: str) -> datetime.date:
    try:
        return datetime.date.fromisoformat(value)
    except ValueError as exc:
        raise CorpusFormatError(f"bad date {value!r} for {context}: {exc}") from None


@dataclass
class ImageRecord:
    """One corpus item; label fields stay ``None`` until an expert or the
    propagation pass fills them."""

    id: str
    file_ref: str | None = None
    location_tag: str | None = None
    expert_category: str | None = None
    expert_date: datetime.date | None = None
    propagated_category: str | None = None
    propagated_date: datetime.date | None = None

    @property
    def effective_category(self) -> str | None:
        return self.expert_category if self.expert_category is not None else self.propagated_category

    @property
    def effective_date(self) -> datetime.date | None:
        return self.expert_date if self.expert_date is not None else self.propagated_date

    def to_json(self) -> dict:
        doc: dict = {"id": self.id}
        if self.file_ref is not None:
            doc["file_ref"] = self.file_ref
        if self.location_tag is not None:
            doc["location_tag"] = self.location_tag
        if self.expert_category is not None:
            doc["expert_category"] = self.expert_category
        if self.expert_date is not None:
            doc["expert_date"] = self.expert_date.isoformat()
        if self.propagated_category is not None:
            doc["propagated_category"] = self.propagated_category
        if self.propagated_date is not None:
            doc["propagated_date"] = self.propagated_date.isoformat()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ImageRecord":
        rid = doc.get("id")
        if not isinstance(rid, str) or not rid:
            raise CorpusFormatError(f"record with missing or empty id: {doc!r}")
        rec = cls(id=rid)
        rec.file_ref = doc.get("file_ref")
        rec.location_tag = doc.get("location_tag")
        rec.expert_category = doc.get("expert_category")
        if "expert_date" in doc:
            rec.expert_date = _parse_date(doc["expert_date"], context=f"record {rid}")
        rec.propagated_category = doc.get("propagated_category")
        if "propagated_date" in doc:
            rec.propagated_date = _parse_date(doc["propagated_date"], context=f"record {rid}")
        return rec


@dataclass
class EmbeddingMatrix:
    """Dense row-major float32 matrix; ``normalized`` is derived at load by
    checking every row's L2 norm against 1 within ``NORM_TOL``."""

    space_name: str
    data: np.ndarray  # (n, d) float32
    normalized: bool

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def _derive_normalized(data: np.ndarray, *, context: str) -> bool:
    norms = np.linalg.norm(data.astype(np.float64), axis=1)
    zero_rows = np.where(norms == 0.0)[0]
    if zero_rows.size:
        raise CorpusFormatError(f"all-zero embedding row {int(zero_rows[0])} in {context}")
    return bool(np.all(np.abs(norms - 1.0) <= NORM_TOL))


def make_embedding_matrix(space_name: str, data: np.ndarray) -> EmbeddingMatrix:
    """Wrap an array as an embedding matrix, deriving the normalized flag."""
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise CorpusFormatError(f"embedding matrix for {space_name!r} must be 2-D")
    if arr.shape[1] < 2:
        raise CorpusFormatError(f"embedding dimension must be >= 2, got {arr.shape[1]}")
    normalized = _derive_normalized(arr, context=f"space {space_name!r}")
    return EmbeddingMatrix(space_name=space_name, data=arr, normalized=normalized)


def normalize_embeddings(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Divide every row by its L2 norm.  Rejects all-zero rows by row index."""
    norms = np.linalg.norm(m.data.astype(np.float64), axis=1)
    zero_rows = np.where(norms == 0.0)[0]
    if zero_rows.size:
        raise CorpusFormatError(f"cannot normalize all-zero row {int(zero_rows[0])}")
    data = (m.data.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(space_name=m.space_name, data=data, normalized=True)


def write_matrix(path: Path, data: np.ndarray) -> None:
    """Write the binary matrix container: magic, u32 n, u32 d, f32 payload.

    All integers and floats are little-endian; the payload is row-major.
    """
    arr = np.ascontiguousarray(data, dtype="<f4")
    n, d = arr.shape
    try:
        with open(path, "wb") as fh:
            fh.write(MATRIX_MAGIC)
            fh.write(struct.pack("<II", n, d))
            fh.write(arr.tobytes(order="C"))
    except OSError as exc:
        raise CorpusIOError(f"cannot write matrix file {path}: {exc}") from exc


def read_matrix(path: Path) -> np.ndarray:
    """Read the binary matrix container written by :func:`write_matrix`."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CorpusIOError(f"cannot read matrix file {path}: {exc}") from exc
    if len(blob) < 12 or blob[:4] != MATRIX_MAGIC:
        raise CorpusFormatError(f"bad matrix header in {path}")
    n, d = struct.unpack("<II", blob[4:12])
    expected = 12 + 4 * n * d
    if len(blob) != expected:
        raise CorpusFormatError(
            f"matrix payload size mismatch in {path}: expected {expected} bytes, got {len(blob)}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=12).reshape(n, d)
    return np.ascontiguousarray(data)


@dataclass
class CorpusManifest:
    """Validated corpus: vocabularies, records, and loaded matrices.

    ``embeddings`` maps space name to its matrix; ``cluster_matrix`` holds the
    optional row-stochastic output of category propagation when a ``clusters``
    sidecar was present.
    """

    categories: list[str]
    locations: list[str]
    records: list[ImageRecord]
    embedding_files: dict[str, str]
    embeddings: dict[str, EmbeddingMatrix] = field(default_factory=dict)
    cluster_matrix: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.records)

    def row_of(self, record_id: str) -> int:
        return self._row_index[record_id]

    def __post_init__(self):
        self._row_index = {r.id: i for i, r in enumerate(self.records)}

    @property
    def min_date(self) -> datetime.date:
        dates = [r.expert_date for r in self.records if r.expert_date is not None]
        dates += [r.propagated_date for r in self.records if r.propagated_date is not None]
        if not dates:
            raise CorpusFormatError("corpus has no dated records")
        return min(dates)

    def day_offset(self, date: datetime.date) -> int:
        return (date - self.min_date).days

    def date_from_offset(self, offset: int) -> datetime.date:
        return self.min_date + datetime.timedelta(days=int(offset))

    def effective_categories(self) -> list[str]:
        """Distinct effective categories present in the corpus, in vocabulary order."""
        present = {r.effective_category for r in self.records if r.effective_category is not None}
        return [c for c in self.categories if c in present]


def _validate_manifest(manifest: CorpusManifest) -> None:
    seen: set[str] = set()
    for rec in manifest.records:
        if rec.id in seen:
            raise CorpusFormatError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
    cats = set(manifest.categories)
    locs = set(manifest.locations)
    for rec in manifest.records:
        for value in (rec.expert_category, rec.propagated_category):
            if value is not None and value not in cats:
                raise CorpusFormatError(f"unknown category {value!r} on record {rec.id!r}")
        if rec.location_tag is not None and rec.location_tag not in locs:
            raise CorpusFormatError(f"unknown location {rec.location_tag!r} on record {rec.id!r}")
    n_expert_cat = sum(1 for r in manifest.records if r.expert_category is not None)
    n_expert_date = sum(1 for r in manifest.records if r.expert_date is not None)
    if n_expert_cat < 1:
        raise CorpusFormatError("corpus needs at least one expert-labeled category")
    if n_expert_date < 2:
        raise CorpusFormatError("corpus needs at least two expert-dated records")


def load_corpus(manifest_path: str | Path) -> CorpusManifest:
    """Load and validate a corpus from its manifest.

    Embedding files are resolved relative to the manifest's directory; every
    matrix must match the record count.
    """
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CorpusIOError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"manifest {manifest_path} is not valid JSON: {exc}") from None

    required = {"categories", "locations", "records", "embedding_files"}
    missing = required - doc.keys()
    if missing:
        raise CorpusFormatError(f"manifest missing keys: {sorted(missing)}")

    records = [ImageRecord.from_json(r) for r in doc["records"]]
    manifest = CorpusManifest(
        categories=list(doc["categories"]),
        locations=list(doc["locations"]),
        records=records,
        embedding_files=dict(doc["embedding_files"]),
    )
    _validate_manifest(manifest)

    base = manifest_path.parent
    for space, rel in manifest.embedding_files.items():
        if Path(rel).is_absolute():
            raise CorpusFormatError(f"embedding file path for {space!r} must be relative: {rel}")
        path = base / rel
        if not path.exists():
            raise CorpusIOError(f"embedding file for space {space!r} not found: {path}")
        data = read_matrix(path)
        if data.shape[0] != manifest.n:
            raise CorpusFormatError(
                f"row-count mismatch for space {space!r} in {path}: "
                f"matrix has {data.shape[0]} rows, manifest has {manifest.n} records"
            )
        if space == CLUSTERS_KEY:
            manifest.cluster_matrix = data.astype(np.float64)
        elif space in EMBEDDING_SPACES:
            manifest.embeddings[space] = make_embedding_matrix(space, data)
        else:
            raise CorpusFormatError(f"unknown embedding space {space!r} in manifest")
    return manifest


def write_corpus(manifest: CorpusManifest, out_dir: str | Path) -> Path:
    """Persist the corpus under ``out_dir``; returns the manifest path.

    The round trip ``load_corpus(write_corpus(x))`` reproduces every field and
    keeps embedding bytes bit-identical, so relative matrix paths from the
    source manifest are preserved.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CorpusIOError(f"cannot create output dir {out_dir}: {exc}") from exc

    doc = {
        "categories": manifest.categories,
        "locations": manifest.locations,
        "records": [r.to_json() for r in manifest.records],
        "embedding_files": manifest.embedding_files,
    }
    for space, rel in manifest.embedding_files.items():
        path = out_dir / rel
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CorpusIOError(f"cannot create {path.parent}: {exc}") from exc
        if space == CLUSTERS_KEY:
            write_matrix(path, np.asarray(manifest.cluster_matrix, dtype=np.float32))
        else:
            write_matrix(path, manifest.embeddings[space].data)
    manifest_path = out_dir / "manifest.json"
    try:
        manifest_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"cannot write manifest {manifest_path}: {exc}") from exc
    return manifest_path


def with_clusters(manifest: CorpusManifest, cluster_matrix: np.ndarray,
                  rel_path: str = "clusters.nfem") -> CorpusManifest:
    """Return a manifest copy that carries a cluster-probability sidecar."""
    files = dict(manifest.embedding_files)
    files[CLUSTERS_KEY] = rel_path
    return replace(manifest, embedding_files=files,
                   cluster_matrix=np.asarray(cluster_matrix, dtype=np.float64))
