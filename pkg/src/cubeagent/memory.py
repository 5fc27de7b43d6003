"""Memory stream: an append-only experience log with scored retrieval.

Each memory carries a description, a kind, creation and last-access ticks,
an importance score and a unit embedding. Retrieval ranks by the sum of
min-max normalised recency, importance and relevance.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

DIM = 256
DECAY = 0.995
KINDS = ("observation", "reflection", "plan")
# built-in importance by kind; backends may pass their own 1-10 score
IMPORTANCE_RULES = {"reflection": 8, "plan": 5, "observation": 3}

_WORD = re.compile(r"[a-z0-9']+")


class EmptyStream(LookupError):
    pass


class CorruptRecord(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


def _bucket(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % DIM


_FALLBACK = tuple([1.0 / math.sqrt(DIM)] * DIM)


def embed(text: str) -> tuple:
    """Feature-hash lowercased words into DIM buckets and L2-normalise.

    Text without any word maps to a fixed unit vector (all buckets equal).
    """
    v = np.zeros(DIM)
    for token in _WORD.findall(text.lower()):
        v[_bucket(token)] += 1.0
    norm = np.linalg.norm(v)
    if norm == 0:
        return _FALLBACK
    return tuple(float(x) for x in v / norm)


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def recency(elapsed: int) -> float:
    return DECAY ** elapsed


@dataclass
class MemoryObject:
    id: str
    description: str
    kind: str
    created_at: int
    last_accessed_at: int
    importance: int
    embedding: tuple

    def to_dict(self) -> dict:
        return {"id": self.id, "description": self.description, "kind": self.kind,
                "created_at": self.created_at, "last_accessed_at": self.last_accessed_at,
                "importance": self.importance, "embedding": list(self.embedding)}

    @classmethod
    def from_dict(cls, d: dict) -> "MemoryObject":
        obj = cls(str(d["id"]), str(d["description"]), str(d["kind"]), int(d["created_at"]),
                  int(d["last_accessed_at"]), int(d["importance"]),
                  tuple(float(x) for x in d["embedding"]))
        obj.check()
        return obj

    def check(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown memory kind {self.kind!r}")
        if not 1 <= self.importance <= 10:
            raise ValueError(f"importance {self.importance} outside 1-10")
        if self.last_accessed_at < self.created_at:
            raise ValueError("last access precedes creation")
        if len(self.embedding) != DIM or abs(math.fsum(x * x for x in self.embedding) - 1) > 2e-6:
            raise ValueError("embedding must be a unit vector of dimension %d" % DIM)


@dataclass(frozen=True)
class Scored:
    memory: MemoryObject
    recency: float
    importance: float
    relevance: float
    score: float


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.ones_like(values)
    return (values - lo) / (hi - lo)


class MemoryStream:
    """Single-owner experience log. Retrieval updates access ticks, so it mutates."""

    def __init__(self, embedder: Callable[[str], Sequence[float]] = embed):
        self.embedder = embedder
        self.memories: list[MemoryObject] = []
        self.clock = 0
        self._index: dict[str, int] = {}

    def __len__(self):
        return len(self.memories)

    def __iter__(self):
        return iter(self.memories)

    def __eq__(self, other):
        if not isinstance(other, MemoryStream):
            return NotImplemented
        return self.clock == other.clock and self.memories == other.memories

    def get(self, memory_id: str) -> MemoryObject:
        return self.memories[self._index[memory_id]]

    def add(self, obj: MemoryObject) -> str:
        """Append a fully specified memory (loading, fixtures)."""
        obj.check()
        if obj.id in self._index:
            raise ValueError(f"duplicate memory id {obj.id}")
        if self.memories and obj.created_at < self.memories[-1].created_at:
            raise ValueError("created_at must not decrease")
        self._index[obj.id] = len(self.memories)
        self.memories.append(obj)
        self.clock = max(self.clock, obj.created_at + 1, obj.last_accessed_at)
        return obj.id

    def record(self, description: str, kind: str = "observation",
               importance: int | None = None) -> str:
        if importance is None:
            importance = IMPORTANCE_RULES[kind]
        vec = tuple(float(x) for x in self.embedder(description))
        obj = MemoryObject(f"m{len(self.memories):06d}", description, kind, self.clock,
                           self.clock, int(importance), vec)
        self.add(obj)
        return obj.id

    def score(self, query: str, now: int | None = None,
              kinds: Iterable[str] | None = None) -> list[Scored]:
        """Every candidate with its normalised components, best first."""
        now = self.clock if now is None else now
        cands = [m for m in self.memories if kinds is None or m.kind in set(kinds)]
        if not cands:
            return []
        q = self.embedder(query)
        rec = np.array([recency(now - m.last_accessed_at) for m in cands])
        imp = np.array([m.importance for m in cands], float)
        rel = np.array([cosine(q, m.embedding) for m in cands])
        total = _minmax(rec) + _minmax(imp) + _minmax(rel)
        scored = [Scored(m, float(a), float(b), float(c), float(t))
                  for m, a, b, c, t in zip(cands, _minmax(rec), _minmax(imp), _minmax(rel), total)]
        scored.sort(key=lambda s: (-s.score, -s.memory.created_at, s.memory.id))
        return scored

    def retrieve(self, query: str, k: int = 5, now: int | None = None,
                 kinds: Iterable[str] | None = None) -> list[MemoryObject]:
        if k < 1:
            raise ValueError("k must be at least 1")
        if not self.memories:
            raise EmptyStream("memory stream is empty")
        now = self.clock if now is None else now
        if now < self.memories[-1].created_at:
            raise ValueError("retrieval time precedes the newest memory")
        top = [s.memory for s in self.score(query, now, kinds)[:k]]
        for m in top:
            i = self._index[m.id]
            self.memories[i] = replace(m, last_accessed_at=now)
        self.clock = max(self.clock, now)
        return [self.memories[self._index[m.id]] for m in top]

    # --- persistence ---------------------------------------------------

    def persist(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for m in self.memories:
                fh.write(json.dumps(m.to_dict()) + "\n")

    @classmethod
    def load(cls, path, embedder: Callable[[str], Sequence[float]] = embed) -> "MemoryStream":
        stream = cls(embedder)
        text = Path(path).read_text(encoding="utf-8")
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                stream.add(MemoryObject.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorruptRecord(n, str(exc)) from None
        if text and not text.endswith("\n"):
            # a writer that died mid-line leaves no trailing newline
            raise CorruptRecord(len(text.splitlines()), "truncated record")
        return stream


def persist(stream: MemoryStream, path) -> None:
    stream.persist(path)


def load(path) -> MemoryStream:
    return MemoryStream.load(path)
