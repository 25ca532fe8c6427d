"""Leave-one-out sentence attribution of a document's OOD score.

attribution(s) = OOD(document) - OOD(document without s).  A positive value
means the segment pushes the document toward out-of-domain.

``compositional`` mode rebuilds the ablated embedding as the token-weighted
mean of the remaining segment embeddings, an approximation since contextual
hidden states change when text is removed.  ``exact`` mode uses embeddings
of the ablated documents recomputed upstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import linalg
from .errors import DimensionMismatch, EmptyDocument, MalformedLine, MissingVariant, SingleSegment
from .gaussian_ood import GaussianModel, RmdScorer, ood_batch

MODES = ("compositional", "exact")


@dataclass(frozen=True)
class Segment:
    segment_id: str
    token_count: int
    embedding: np.ndarray


@dataclass(frozen=True)
class SegmentedDocument:
    doc_id: str
    segments: tuple[Segment, ...]
    full_embedding: np.ndarray | None = None
    variant_embeddings: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        dims = {s.embedding.shape[0] for s in self.segments}
        if self.full_embedding is not None:
            dims.add(self.full_embedding.shape[0])
        dims.update(v.shape[0] for v in self.variant_embeddings.values())
        if len(dims) > 1:
            raise DimensionMismatch(f"document {self.doc_id}: embeddings disagree on d ({sorted(dims)})")
        for s in self.segments:
            if s.token_count < 1:
                raise ValueError(f"segment {s.segment_id}: token_count must be >= 1")


def make_document(doc_id, segments, full_embedding=None, variant_embeddings=None) -> SegmentedDocument:
    """Build a document from ``(segment_id, token_count, embedding)`` triples."""
    segs = tuple(Segment(str(sid), int(cnt), linalg.as_vector(emb, f"segment {sid}")) for sid, cnt, emb in segments)
    full = None if full_embedding is None else linalg.as_vector(full_embedding, "full_embedding")
    variants = {str(k): linalg.as_vector(v, f"variant {k}") for k, v in (variant_embeddings or {}).items()}
    return SegmentedDocument(str(doc_id), segs, full, variants)


def compose_mean(segments: Sequence[Segment]) -> np.ndarray:
    """Token-count-weighted mean of segment embeddings."""
    if len(segments) == 0:
        raise EmptyDocument("cannot compose an embedding from zero segments")
    counts = np.array([s.token_count for s in segments], dtype=np.float64)
    emb = np.vstack([s.embedding for s in segments])
    return counts @ emb / counts.sum()


def sentence_attribution(
    doc: SegmentedDocument,
    scorer: GaussianModel | RmdScorer,
    side: str = "input",
    mode: str = "compositional",
) -> list[tuple[str, float]]:
    """Per-segment leave-one-out attributions, in segment order.

    A bare :class:`GaussianModel` scores with plain MD; an :class:`RmdScorer`
    uses RMD on ``side``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    segs = doc.segments
    if len(segs) == 0:
        raise EmptyDocument(f"document {doc.doc_id} has no segments")
    if mode == "compositional":
        if len(segs) < 2:
            raise SingleSegment(f"document {doc.doc_id}: leave-one-out needs at least 2 segments")
        full = compose_mean(segs)
        ablated = [compose_mean(segs[:i] + segs[i + 1 :]) for i in range(len(segs))]
    else:
        if doc.full_embedding is None:
            raise MissingVariant(f"document {doc.doc_id}: exact mode needs full_embedding")
        missing = [s.segment_id for s in segs if s.segment_id not in doc.variant_embeddings]
        if missing:
            raise MissingVariant(f"document {doc.doc_id}: no variant embedding for segments {missing}")
        full = doc.full_embedding
        ablated = [doc.variant_embeddings[s.segment_id] for s in segs]
    scores = ood_batch(scorer, np.vstack([full] + ablated), side, threads=1)
    return [(s.segment_id, float(scores[0] - scores[i + 1])) for i, s in enumerate(segs)]


def attribution_rows(doc: SegmentedDocument, attributions, mode: str) -> list[dict]:
    return [
        {"doc_id": doc.doc_id, "segment_id": sid, "attribution": value, "mode": mode}
        for sid, value in attributions
    ]


def read_documents(lines: Iterable[str]) -> list[SegmentedDocument]:
    """Parse JSONL documents.

    Each line: ``{"doc_id", "segments": [{"segment_id", "token_count",
    "embedding"}], "full_embedding"?, "variants"?: {segment_id: [...]}}``.
    """
    docs = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            segments = [(s["segment_id"], s["token_count"], s["embedding"]) for s in obj["segments"]]
            docs.append(make_document(obj["doc_id"], segments, obj.get("full_embedding"), obj.get("variants")))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise MalformedLine(f"bad document record: {exc}", lineno) from exc
    return docs
