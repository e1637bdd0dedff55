"""
Text embedders and the on-disk embedding cache.

Every embedder exposes ``backend_id``, ``dim``, ``embed(text)`` and
``embed_batch(texts)``; all vectors are L2-normalised float32.
"""

import hashlib
import os
import struct
import tempfile
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import openai

from .errors import EmbedderUnavailable
from .log_utils import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class Embedding:
    values: np.ndarray

    @property
    def dim(self):
        return int(self.values.shape[0])


def _check_text(text):
    if not isinstance(text, str) or not text.strip():
        raise ValueError("cannot embed empty text")


def l2_normalize(vector):
    """
    Scales a vector to unit length.

    :raises EmbedderUnavailable: the vector is all zeros.
    """
    vector = np.asarray(vector, dtype=np.float64)
    norm = np.linalg.norm(vector)
    if norm == 0.0 or not np.isfinite(norm):
        raise EmbedderUnavailable("embedding backend returned a zero or non-finite vector")
    return (vector / norm).astype(np.float32)


@lru_cache(maxsize=1 << 18)
def _bucket(gram, dim):
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


class HashedNgramEmbedder:
    """
    Deterministic offline embedder: hashed character n-gram counts.

    The lower-cased, whitespace-collapsed text is padded with ``^``/``$``
    markers and every character n-gram in ``ngram_range`` increments one of
    ``dim`` buckets. The count vector is L2-normalised.
    """

    def __init__(self, dim=512, ngram_range=(2, 4)):
        if dim < 8:
            raise ValueError("dim must be at least 8")
        low, high = ngram_range
        if not 1 <= low <= high:
            raise ValueError(f"invalid ngram_range {ngram_range}")
        self.dim = dim
        self.ngram_range = (low, high)
        self.backend_id = f"hashed-ngram:{dim}:{low}-{high}"

    def _counts(self, text):
        padded = "^" + " ".join(text.lower().split()) + "$"
        counts = np.zeros(self.dim, dtype=np.float64)
        low, high = self.ngram_range
        for n in range(low, high + 1):
            for i in range(len(padded) - n + 1):
                counts[_bucket(padded[i:i + n], self.dim)] += 1.0
        return counts

    def embed(self, text):
        _check_text(text)
        return Embedding(l2_normalize(self._counts(text)))

    def embed_batch(self, texts):
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.vstack([self.embed(t).values for t in texts])


class RemoteEmbedder:
    """Embeddings from an OpenAI-compatible ``/embeddings`` endpoint."""

    def __init__(self, model, base_url=None, api_key_env="OPENAI_API_KEY", timeout=30.0, batch_size=64):
        """
        :param model: Embedding model name.
        :type model: str
        :param base_url: Endpoint base URL; ``OPENAI_BASE_URL`` when omitted.
        :type base_url: str, optional
        :param api_key_env: Environment variable holding the API key.
        :type api_key_env: str
        """
        self.model = model
        self.base_url = base_url or os.getenv("OPENAI_BASE_URL") or None
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.batch_size = batch_size
        self.backend_id = f"remote:{self.base_url or 'default'}:{model}"
        self.dim = None
        self._client = None

    def _get_client(self):
        if self._client is None:
            api_key = os.getenv(self.api_key_env, "").strip()
            if not api_key:
                raise EmbedderUnavailable(f"missing API key: set {self.api_key_env}")
            self._client = openai.OpenAI(api_key=api_key, base_url=self.base_url, timeout=self.timeout)
        return self._client

    def embed(self, text):
        _check_text(text)
        return Embedding(self.embed_batch([text])[0])

    def embed_batch(self, texts):
        for text in texts:
            _check_text(text)
        rows = []
        for start in range(0, len(texts), self.batch_size):
            chunk = list(texts[start:start + self.batch_size])
            try:
                response = self._get_client().embeddings.create(model=self.model, input=chunk)
            except openai.OpenAIError as exc:
                raise EmbedderUnavailable(f"embedding request failed: {exc}") from exc
            for item in sorted(response.data, key=lambda d: d.index):
                rows.append(l2_normalize(item.embedding))
        if not rows:
            return np.zeros((0, self.dim or 0), dtype=np.float32)
        matrix = np.vstack(rows)
        self.dim = int(matrix.shape[1])
        return matrix


class EmbeddingCache:
    """
    Content-addressed vector store on disk.

    Keys are SHA-256 of ``backend_id + NUL + text``; each value lives in
    ``<dir>/<key[:2]>/<key>.bin`` as a little-endian uint32 dimension
    header followed by float32 values. Writes go to a temp file that is
    renamed into place, so concurrent writers never leave partial files.
    """

    HEADER = struct.Struct("<I")

    def __init__(self, cache_dir):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(backend_id, text):
        return hashlib.sha256(f"{backend_id}\x00{text}".encode("utf-8")).hexdigest()

    def _path(self, key):
        return self.cache_dir / key[:2] / f"{key}.bin"

    def get(self, backend_id, text):
        path = self._path(self.key(backend_id, text))
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            return None
        (dim,) = self.HEADER.unpack_from(raw)
        values = np.frombuffer(raw, dtype="<f4", offset=self.HEADER.size)
        if values.shape[0] != dim:
            logger.warning(f"Ignoring corrupt embedding cache entry {path}")
            return None
        return values.astype(np.float32)

    def put(self, backend_id, text, vector):
        path = self._path(self.key(backend_id, text))
        path.parent.mkdir(parents=True, exist_ok=True)
        vector = np.asarray(vector, dtype="<f4")
        payload = self.HEADER.pack(vector.shape[0]) + vector.tobytes()
        with tempfile.NamedTemporaryFile(dir=path.parent, delete=False, suffix=".tmp") as handle:
            handle.write(payload)
            tmp_name = handle.name
        os.replace(tmp_name, path)


class CachedEmbedder:
    """Wraps an embedder so every vector is read from or written to an :class:`EmbeddingCache`."""

    def __init__(self, inner, cache):
        self.inner = inner
        self.cache = cache
        self.backend_id = inner.backend_id
        self.hits = 0
        self.misses = 0

    @property
    def dim(self):
        return self.inner.dim

    def embed(self, text):
        return Embedding(self.embed_batch([text])[0])

    def embed_batch(self, texts):
        for text in texts:
            _check_text(text)
        rows = [self.cache.get(self.backend_id, t) for t in texts]
        missing = [i for i, row in enumerate(rows) if row is None]
        self.hits += len(texts) - len(missing)
        self.misses += len(missing)
        if missing:
            fresh = self.inner.embed_batch([texts[i] for i in missing])
            for i, vector in zip(missing, fresh):
                self.cache.put(self.backend_id, texts[i], vector)
                rows[i] = vector
        if not rows:
            return np.zeros((0, self.dim or 0), dtype=np.float32)
        return np.vstack(rows).astype(np.float32)


def embed_text(text, embedder):
    """
    Embeds one text with any embedder backend.

    :rtype: :class:`Embedding`
    :raises EmbedderUnavailable: the backend failed (never returns zeros).
    """
    return embedder.embed(text)
