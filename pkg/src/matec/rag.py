"""Document ingestion, chunking, embedding, and exact top-k cosine retrieval.

Search is exact (full scan), not approximate: reference corpora here are
clinical guideline excerpts at desk scale, so correctness and testability
outrank speed. The default embedder is a deterministic feature-hash embedding
(no model dependency), making the whole pipeline reproducible; a live
HTTP embedding backend can be swapped in via configuration.

Persistence (one file per collection, little-endian):

    magic   8s   b"MATECRAG"
    version u16  currently 1
    dim     u16  vector dimension
    embedder id  u16 length + utf-8 bytes
    then repeated length-prefixed chunk records:
    record_len u32, body:
        generation u32      (ingest counter; highest generation per doc wins)
        doc_id     u16 len + utf-8
        ordinal    u32
        title      u16 len + utf-8
        text       u32 len + utf-8
        vector     dim * f32

The file is append-compacted: every ingest appends its chunks; superseded
document versions are dropped on load and physically removed by ``compact``.
"""
from __future__ import annotations

import hashlib
import re
import struct
import threading
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from .domain import BackendError, DomainError, FrozenModel

__all__ = [
    "BackendError", "BadChunkParams", "Chunk", "EmptyDocument", "EmptyStore",
    "HashEmbedder", "HttpEmbedder", "RagStore", "RetrievedChunk", "chunk_text",
]

MAGIC = b"MATECRAG"
FORMAT_VERSION = 1
HASH_DIM = 256


class EmptyDocument(DomainError):
    pass


class BadChunkParams(DomainError):
    pass


class EmptyStore(DomainError):
    pass


class Chunk(FrozenModel):
    doc_id: str
    ordinal: int
    text: str
    vector: tuple[float, ...]
    source_title: str

    @property
    def chunk_id(self) -> tuple[str, int]:
        return (self.doc_id, self.ordinal)


class RetrievedChunk(FrozenModel):
    chunk: Chunk
    score: float
    rank: int


class Embedder(Protocol):
    dim: int
    embedder_id: str

    def embed(self, text: str) -> np.ndarray: ...


_TOKEN_RE = re.compile(r"\w+")


class HashEmbedder:
    """Deterministic token-hash embedding: sha1 buckets, L2-normalized counts."""

    def __init__(self, dim: int = HASH_DIM):
        self.dim = dim
        self.embedder_id = f"hash-{dim}"

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise EmptyDocument("cannot embed empty text")
        tokens = _TOKEN_RE.findall(text.lower()) or [text]
        vec = np.zeros(self.dim, dtype=np.float32)
        for token in tokens:
            bucket = int.from_bytes(hashlib.sha1(token.encode("utf-8")).digest()[:8], "big")
            vec[bucket % self.dim] += 1.0
        return vec / np.linalg.norm(vec)


class HttpEmbedder:
    """Calls a configured embeddings endpoint (de-facto wire format)."""

    def __init__(self, base_url: str, model: str, api_key: str = "", dim: int = HASH_DIM, timeout_s: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.dim = dim
        self.embedder_id = f"http-{model}"
        self.timeout_s = timeout_s

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise EmptyDocument("cannot embed empty text")
        import httpx

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(
                f"{self.base_url}/embeddings",
                json={"model": self.model, "input": text},
                headers=headers,
                timeout=self.timeout_s,
            )
        except httpx.HTTPError as exc:
            raise BackendError(f"embedding request failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"embedding endpoint returned {resp.status_code}")
        vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float32)
        norm = float(np.linalg.norm(vec))
        if norm == 0:
            raise BackendError("embedding endpoint returned a zero vector")
        return vec / norm


def chunk_text(body: str, chunk_size_chars: int, overlap_chars: int) -> list[str]:
    """Sliding-window chunks with word-boundary-adjusted cuts.

    Windows start every ``chunk_size - overlap`` characters; a window that
    would split a word is shortened to the last whitespace inside it (kept
    as-is when it contains none). The final window runs to end of body.
    """
    if chunk_size_chars <= 0 or overlap_chars < 0 or overlap_chars >= chunk_size_chars:
        raise BadChunkParams(
            f"need 0 <= overlap ({overlap_chars}) < chunk_size ({chunk_size_chars}) and chunk_size > 0"
        )
    if not body:
        raise EmptyDocument("document body is empty")
    stride = chunk_size_chars - overlap_chars
    chunks: list[str] = []
    for start in range(0, len(body), stride):
        end = start + chunk_size_chars
        if end < len(body):
            cut = body.rfind(" ", start + 1, end + 1)
            if cut > start:
                end = cut
        chunks.append(body[start:end])
    return chunks


class _Snapshot:
    """Immutable view the readers see; swapped atomically on every write."""

    def __init__(self, chunks: tuple[Chunk, ...], dim: int):
        self.chunks = chunks
        # float64 scoring: embedder output converts exactly, so rankings are
        # reproducible from the stored vectors alone
        if chunks:
            self.matrix = np.array([c.vector for c in chunks], dtype=np.float64)
        else:
            self.matrix = np.zeros((0, dim), dtype=np.float64)


class RagStore:
    """Exact-search vector store over document chunks.

    Reads are lock-free against an immutable snapshot; ingests serialize on a
    lock and swap the snapshot, so a query never sees a half-replaced document.
    """

    def __init__(self, embedder: Optional[Embedder] = None, path: Optional[Path] = None):
        self.embedder = embedder or HashEmbedder()
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._snapshot = _Snapshot((), self.embedder.dim)
        self._generation = 0
        if self.path is not None and self.path.exists():
            self._load()
        elif self.path is not None:
            self._write_header()

    def __len__(self) -> int:
        return len(self._snapshot.chunks)

    def ingest(self, doc_id: str, title: str, body: str, chunk_size_chars: int = 1000, overlap_chars: int = 200) -> int:
        """Chunk, embed, and index a document; re-ingesting replaces it."""
        pieces = chunk_text(body, chunk_size_chars, overlap_chars)
        with self._lock:
            self._generation += 1
            new_chunks = tuple(
                Chunk(
                    doc_id=doc_id,
                    ordinal=i,
                    text=piece,
                    vector=tuple(float(x) for x in self.embedder.embed(piece)),
                    source_title=title,
                )
                for i, piece in enumerate(pieces)
            )
            kept = tuple(c for c in self._snapshot.chunks if c.doc_id != doc_id)
            self._snapshot = _Snapshot(kept + new_chunks, self.embedder.dim)
            if self.path is not None:
                self._append_records(new_chunks, self._generation)
        return len(new_chunks)

    def query(self, text: str, k: int) -> list[RetrievedChunk]:
        """Exact top-k by cosine similarity; ties broken by ascending chunk_id."""
        if k < 1:
            raise DomainError("k must be >= 1")
        snapshot = self._snapshot
        if not snapshot.chunks:
            raise EmptyStore("no chunks ingested")
        qvec = self.embedder.embed(text).astype(np.float64)
        scores = snapshot.matrix @ qvec
        order = sorted(range(len(snapshot.chunks)), key=lambda i: (-scores[i], snapshot.chunks[i].chunk_id))
        return [
            RetrievedChunk(chunk=snapshot.chunks[i], score=float(scores[i]), rank=rank)
            for rank, i in enumerate(order[: min(k, len(order))], start=1)
        ]

    # -- persistence -------------------------------------------------------

    def _write_header(self) -> None:
        assert self.path is not None
        self.path.parent.mkdir(parents=True, exist_ok=True)
        embedder_id = self.embedder.embedder_id.encode("utf-8")
        with open(self.path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<HH", FORMAT_VERSION, self.embedder.dim))
            fh.write(struct.pack("<H", len(embedder_id)))
            fh.write(embedder_id)

    def _append_records(self, chunks: tuple[Chunk, ...], generation: int) -> None:
        assert self.path is not None
        with open(self.path, "ab") as fh:
            for chunk in chunks:
                body = self._pack_record(chunk, generation)
                fh.write(struct.pack("<I", len(body)))
                fh.write(body)

    def _pack_record(self, chunk: Chunk, generation: int) -> bytes:
        doc = chunk.doc_id.encode("utf-8")
        title = chunk.source_title.encode("utf-8")
        text = chunk.text.encode("utf-8")
        return b"".join(
            [
                struct.pack("<I", generation),
                struct.pack("<H", len(doc)),
                doc,
                struct.pack("<I", chunk.ordinal),
                struct.pack("<H", len(title)),
                title,
                struct.pack("<I", len(text)),
                text,
                np.asarray(chunk.vector, dtype=np.float32).tobytes(),
            ]
        )

    def _load(self) -> None:
        assert self.path is not None
        raw = self.path.read_bytes()
        if len(raw) < len(MAGIC) + 6 or raw[: len(MAGIC)] != MAGIC:
            raise DomainError(f"{self.path} is not a rag store file")
        offset = len(MAGIC)
        version, dim = struct.unpack_from("<HH", raw, offset)
        offset += 4
        if version != FORMAT_VERSION:
            raise DomainError(f"unsupported store format version {version}")
        (id_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        embedder_id = raw[offset : offset + id_len].decode("utf-8")
        offset += id_len
        if embedder_id != self.embedder.embedder_id or dim != self.embedder.dim:
            raise DomainError(
                f"store was built with embedder {embedder_id!r} dim {dim}, "
                f"current embedder is {self.embedder.embedder_id!r} dim {self.embedder.dim}"
            )
        records: list[tuple[int, Chunk]] = []
        while offset + 4 <= len(raw):
            (length,) = struct.unpack_from("<I", raw, offset)
            if offset + 4 + length > len(raw):
                break  # torn tail from an interrupted append
            records.append(self._unpack_record(raw[offset + 4 : offset + 4 + length], dim))
            offset += 4 + length
        latest: dict[str, int] = {}
        for generation, chunk in records:
            latest[chunk.doc_id] = max(latest.get(chunk.doc_id, 0), generation)
        live = [c for g, c in records if g == latest[c.doc_id]]
        live.sort(key=lambda c: c.chunk_id)
        self._snapshot = _Snapshot(tuple(live), dim)
        self._generation = max((g for g, _ in records), default=0)

    @staticmethod
    def _unpack_record(body: bytes, dim: int) -> tuple[int, Chunk]:
        offset = 0
        (generation,) = struct.unpack_from("<I", body, offset)
        offset += 4
        (doc_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        doc_id = body[offset : offset + doc_len].decode("utf-8")
        offset += doc_len
        (ordinal,) = struct.unpack_from("<I", body, offset)
        offset += 4
        (title_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        title = body[offset : offset + title_len].decode("utf-8")
        offset += title_len
        (text_len,) = struct.unpack_from("<I", body, offset)
        offset += 4
        text = body[offset : offset + text_len].decode("utf-8")
        offset += text_len
        vector = np.frombuffer(body, dtype="<f4", count=dim, offset=offset)
        return generation, Chunk(
            doc_id=doc_id,
            ordinal=ordinal,
            text=text,
            vector=tuple(float(x) for x in vector),
            source_title=title,
        )

    def compact(self) -> None:
        """Rewrite the collection file keeping only live chunk records."""
        if self.path is None:
            return
        with self._lock:
            snapshot = self._snapshot
            self._write_header()
            self._append_records(snapshot.chunks, self._generation)
