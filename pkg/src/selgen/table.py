"""ScoreTable: the per-example CSV that flows between CLI stages.

Fixed leading columns ``id,dataset,side,md,rmd,logit,knn,perplexity``;
quality metrics follow as ``q:<metric>``, then any combiner columns.
Missing numeric values are written as empty fields and read back as NaN.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, MalformedLine, MissingFeature

SCORE_COLUMNS = ("id", "dataset", "side", "md", "rmd", "logit", "knn", "perplexity")
TEXT_COLUMNS = frozenset({"id", "dataset", "side", "split"})
QUALITY_PREFIX = "q:"


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    return "" if math.isnan(v) else repr(v)


class ScoreTable:
    def __init__(self, columns: dict[str, Sequence]):
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise LengthMismatch(f"columns differ in length: {sorted(lengths)}")
        self.columns: dict[str, list | np.ndarray] = dict(columns)

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def names(self) -> list[str]:
        return list(self.columns)

    def text(self, name: str) -> list[str]:
        if name not in self.columns:
            raise MissingFeature(f"no column {name!r}")
        return [str(v) for v in self.columns[name]]

    def numeric(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise MissingFeature(f"no column {name!r} (have: {', '.join(self.columns)})")
        return np.asarray(self.columns[name], dtype=np.float64)

    def quality(self, metric: str) -> np.ndarray:
        return self.numeric(QUALITY_PREFIX + metric)

    def add(self, name: str, values) -> None:
        if self.columns and len(values) != len(self):
            raise LengthMismatch(f"column {name!r} has {len(values)} values, table has {len(self)} rows")
        self.columns[name] = values

    def subset(self, mask) -> ScoreTable:
        idx = np.flatnonzero(np.asarray(mask, dtype=bool))
        out = {}
        for k, v in self.columns.items():
            out[k] = np.asarray(v)[idx] if isinstance(v, np.ndarray) else [v[i] for i in idx]
        return ScoreTable(out)

    def write_csv(self, path) -> None:
        names = self.names()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            cols = [self.columns[n] for n in names]
            for i in range(len(self)):
                w.writerow([fmt(c[i]) for c in cols])

    @classmethod
    def read_csv(cls, path) -> ScoreTable:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise MalformedLine(f"{path}: empty score table", 1)
            raw: dict[str, list] = {h: [] for h in header}
            for lineno, rec in enumerate(reader, 2):
                if not rec:
                    continue
                if len(rec) != len(header):
                    raise MalformedLine(f"{path}: expected {len(header)} fields, got {len(rec)}", lineno)
                for h, v in zip(header, rec):
                    raw[h].append(v)
        cols: dict[str, Sequence] = {}
        for h, vals in raw.items():
            if h in TEXT_COLUMNS:
                cols[h] = vals
                continue
            try:
                cols[h] = np.array([float(v) if v != "" else np.nan for v in vals], dtype=np.float64)
            except ValueError:
                cols[h] = vals
        return cls(cols)


def ensure_parent(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p
