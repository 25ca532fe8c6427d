"""On-disk formats: embedding matrices, per-example metadata, fitted models.

Embedding file (``.emb``), all little-endian::

    b"EMB1" | u32 version (=1) | u32 dtype (1 = float32) | u64 N | u64 d | N*d float32, row-major

Metadata is a JSONL sidecar (``.jsonl``), line i describing row i.  Models
are JSON objects carrying a ``kind`` discriminator and ``version``.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .classifier_ood import BinaryClassifier
from .combiner import LinearCombiner
from .errors import (
    BadMagic,
    DtypeMismatch,
    DuplicateId,
    LineCountMismatch,
    MalformedLine,
    NonFiniteInput,
    SchemaMismatch,
    TruncatedPayload,
    UnsupportedVersion,
    VersionUnsupported,
)
from .gaussian_ood import GaussianModel, RmdScorer

MAGIC = b"EMB1"
FORMAT_VERSION = 1
DTYPE_F32 = 1
_HEADER = struct.Struct("<4sIIQQ")
HEADER_SIZE = _HEADER.size  # 28 bytes

MODEL_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# embeddings


def write_embeddings(path, matrix) -> None:
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("embedding matrix contains NaN or Inf")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    n, d = payload.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_F32, n, d))
        fh.write(payload.tobytes(order="C"))


def read_embeddings_f32(path) -> np.ndarray:
    """The stored payload exactly as float32."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        if raw[:4] != MAGIC[: len(raw[:4])]:
            raise BadMagic(f"{path}: not an EMB1 file")
        raise TruncatedPayload(f"{path}: header truncated at byte {len(raw)}", len(raw))
    magic, version, dtype, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"{path}: format version {version} (supported: {FORMAT_VERSION})")
    if dtype != DTYPE_F32:
        raise DtypeMismatch(f"{path}: dtype code {dtype} (expected {DTYPE_F32} = float32)")
    expected = HEADER_SIZE + 4 * n * d
    if len(raw) < expected:
        raise TruncatedPayload(
            f"{path}: payload truncated at byte {len(raw)}, expected {expected} bytes", len(raw)
        )
    if len(raw) > expected:
        raise TruncatedPayload(f"{path}: {len(raw) - expected} trailing bytes after payload", expected)
    return np.frombuffer(raw, dtype="<f4", count=n * d, offset=HEADER_SIZE).reshape(n, d).astype(np.float32)


def read_embeddings(path) -> np.ndarray:
    """Embedding matrix widened to float64."""
    return read_embeddings_f32(path).astype(np.float64)


# ---------------------------------------------------------------------------
# metadata


@dataclass
class ExampleMeta:
    id: str
    dataset: str = ""
    split: str = ""
    side: str = "input"
    perplexity: float | None = None
    quality: dict[str, float] = field(default_factory=dict)
    n_tokens: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"id": self.id, "dataset": self.dataset, "split": self.split, "side": self.side}
        if self.perplexity is not None:
            out["perplexity"] = self.perplexity
        if self.quality:
            out["quality"] = self.quality
        if self.n_tokens is not None:
            out["n_tokens"] = self.n_tokens
        if self.extra:
            out["extra"] = self.extra
        return out

    @classmethod
    def from_json(cls, obj: dict) -> ExampleMeta:
        if not isinstance(obj, dict) or "id" not in obj:
            raise ValueError("record must be an object with an 'id'")
        side = obj.get("side", "input")
        if side not in ("input", "output"):
            raise ValueError(f"side must be 'input' or 'output', got {side!r}")
        ppx = obj.get("perplexity")
        if ppx is not None:
            ppx = float(ppx)
            if not math.isfinite(ppx):
                raise ValueError("perplexity must be finite")
        quality = {str(k): float(v) for k, v in (obj.get("quality") or {}).items()}
        if not all(math.isfinite(v) for v in quality.values()):
            raise ValueError("quality values must be finite")
        n_tokens = obj.get("n_tokens")
        return cls(
            id=str(obj["id"]),
            dataset=str(obj.get("dataset", "")),
            split=str(obj.get("split", "")),
            side=side,
            perplexity=ppx,
            quality=quality,
            n_tokens=None if n_tokens is None else int(n_tokens),
            extra=dict(obj.get("extra") or {}),
        )


def write_metadata(path, metas: Sequence[ExampleMeta]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in metas:
            fh.write(json.dumps(m.to_json(), sort_keys=True) + "\n")


def read_metadata(path, expected_n: int | None = None) -> list[ExampleMeta]:
    metas: list[ExampleMeta] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                meta = ExampleMeta.from_json(json.loads(line))
            except (ValueError, TypeError) as exc:
                raise MalformedLine(f"{path}: {exc}", lineno) from exc
            if meta.id in seen:
                raise DuplicateId(f"{path}: id {meta.id!r} already used on line {seen[meta.id]}", lineno)
            seen[meta.id] = lineno
            metas.append(meta)
    if expected_n is not None and len(metas) != expected_n:
        raise LineCountMismatch(f"{path}: {len(metas)} records but the matrix has {expected_n} rows")
    return metas


# ---------------------------------------------------------------------------
# stores (matrix + sidecar)


@dataclass
class EmbeddingStore:
    matrix: np.ndarray
    meta: list[ExampleMeta]

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.meta):
            raise LineCountMismatch(f"{len(self.meta)} metadata records for {self.matrix.shape[0]} rows")
        ids = [m.id for m in self.meta]
        if len(set(ids)) != len(ids):
            raise DuplicateId("ids are not unique")

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def ids(self) -> list[str]:
        return [m.id for m in self.meta]

    def select(self, mask) -> EmbeddingStore:
        idx = np.flatnonzero(np.asarray(mask, dtype=bool))
        return EmbeddingStore(self.matrix[idx], [self.meta[i] for i in idx])

    def where(self, **fields) -> EmbeddingStore:
        """Rows whose metadata matches every given field exactly."""
        return self.select([all(getattr(m, k) == v for k, v in fields.items()) for m in self.meta])


def store_paths(prefix) -> tuple[Path, Path]:
    p = Path(prefix)
    if p.suffix in (".emb", ".jsonl"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".emb"), p.with_name(p.name + ".jsonl")


def save_store(prefix, store: EmbeddingStore) -> tuple[Path, Path]:
    emb, meta = store_paths(prefix)
    emb.parent.mkdir(parents=True, exist_ok=True)
    write_embeddings(emb, store.matrix)
    write_metadata(meta, store.meta)
    return emb, meta


def load_store(prefix) -> EmbeddingStore:
    emb, meta = store_paths(prefix)
    matrix = read_embeddings(emb)
    return EmbeddingStore(matrix, read_metadata(meta, matrix.shape[0]))


def read_csv_store(path, side: str = "input") -> EmbeddingStore:
    """Hand-built fixtures: header ``id,dataset,split,v0,...,v{d-1}``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["id", "dataset", "split"]:
            raise MalformedLine(f"{path}: header must start with id,dataset,split", 1)
        vcols = header[3:]
        if vcols != [f"v{i}" for i in range(len(vcols))]:
            raise MalformedLine(f"{path}: vector columns must be v0..v{{d-1}}", 1)
        rows, metas, seen = [], [], {}
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise MalformedLine(f"{path}: expected {len(header)} fields, got {len(rec)}", lineno)
            try:
                values = [float(v) for v in rec[3:]]
            except ValueError as exc:
                raise MalformedLine(f"{path}: {exc}", lineno) from exc
            if rec[0] in seen:
                raise DuplicateId(f"{path}: id {rec[0]!r} repeated", lineno)
            seen[rec[0]] = lineno
            rows.append(values)
            metas.append(ExampleMeta(id=rec[0], dataset=rec[1], split=rec[2], side=side))
    matrix = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(vcols))
    return EmbeddingStore(matrix, metas)


# ---------------------------------------------------------------------------
# models


def _tril_rows(lower: np.ndarray) -> list[list[float]]:
    return [lower[i, : i + 1].tolist() for i in range(lower.shape[0])]


def _from_tril(rows: list[list[float]]) -> np.ndarray:
    d = len(rows)
    lower = np.zeros((d, d))
    for i, r in enumerate(rows):
        if len(r) != i + 1:
            raise SchemaMismatch(f"cholesky row {i} has {len(r)} entries, expected {i + 1}")
        lower[i, : i + 1] = r
    return lower


def _gaussian_to_json(m: GaussianModel) -> dict:
    return {"mu": m.mu.tolist(), "chol_lower": _tril_rows(m.chol), "ridge": m.ridge, "n_fit": m.n_fit}


def _gaussian_from_json(obj: dict) -> GaussianModel:
    mu = np.asarray(obj["mu"], dtype=np.float64)
    chol = _from_tril(obj["chol_lower"])
    if chol.shape[0] != mu.shape[0]:
        raise SchemaMismatch("mu and cholesky factor disagree on dimension")
    if np.any(np.diag(chol) <= 0):
        raise SchemaMismatch("cholesky diagonal must be strictly positive")
    return GaussianModel(mu=mu, chol=chol, n_fit=int(obj["n_fit"]), ridge=float(obj["ridge"]))


def model_to_json(model) -> dict:
    if isinstance(model, GaussianModel):
        body = {"kind": "gaussian", **_gaussian_to_json(model)}
    elif isinstance(model, RmdScorer):
        body = {"kind": "rmd_scorer"}
        for name in ("input_fg", "input_bg", "output_fg", "output_bg"):
            part = getattr(model, name)
            body[name] = None if part is None else _gaussian_to_json(part)
    elif isinstance(model, BinaryClassifier):
        body = {
            "kind": "binary_classifier",
            "beta0": model.beta0,
            "beta1": model.beta1.tolist(),
            "l2": model.l2,
            "n_iter": model.n_iter,
            "converged": model.converged,
        }
    elif isinstance(model, LinearCombiner):
        body = {
            "kind": "linear_combiner",
            "intercept": model.intercept,
            "weights": dict(model.weights),
            "fit_rmse": model.fit_rmse,
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    body["version"] = MODEL_SCHEMA_VERSION
    return body


def model_from_json(obj: dict, kind: str | None = None):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaMismatch("model JSON lacks a 'kind' field")
    if kind is not None and obj["kind"] != kind:
        raise SchemaMismatch(f"expected kind {kind!r}, found {obj['kind']!r}")
    version = obj.get("version")
    if version != MODEL_SCHEMA_VERSION:
        raise VersionUnsupported(f"model schema version {version!r} (supported: {MODEL_SCHEMA_VERSION})")
    try:
        k = obj["kind"]
        if k == "gaussian":
            return _gaussian_from_json(obj)
        if k == "rmd_scorer":
            parts = {
                name: None if obj.get(name) is None else _gaussian_from_json(obj[name])
                for name in ("input_fg", "input_bg", "output_fg", "output_bg")
            }
            return RmdScorer(**parts)
        if k == "binary_classifier":
            return BinaryClassifier(
                beta0=float(obj["beta0"]),
                beta1=np.asarray(obj["beta1"], dtype=np.float64),
                l2=float(obj["l2"]),
                n_iter=int(obj["n_iter"]),
                converged=bool(obj["converged"]),
            )
        if k == "linear_combiner":
            return LinearCombiner(
                intercept=float(obj["intercept"]),
                weights={str(n): float(w) for n, w in obj["weights"].items()},
                fit_rmse=float(obj["fit_rmse"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"malformed {obj.get('kind')} model: {exc}") from exc
    raise SchemaMismatch(f"unknown model kind {obj['kind']!r}")


def save_model(path, model) -> None:
    Path(path).write_text(json.dumps(model_to_json(model), indent=1) + "\n", encoding="utf-8")


def load_model(path, kind: str | None = None):
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not JSON ({exc})") from exc
    return model_from_json(obj, kind)
