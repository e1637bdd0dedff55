"""
Dense fact retrieval.

Verbalized facts are embedded once into a :class:`VectorIndex`; questions
are embedded with the same embedder and the top-k facts by cosine
similarity are returned. Vectors are unit length, so cosine is the inner
product.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .embedders import Embedding
from .log_utils import get_logger
from .verbalizer import verbalize_store

logger = get_logger(__name__)

DEFAULT_TOP_K = 50
SCORE_DECIMALS = 9


class IndexBackend(Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class RetrievalResult:
    fact_id: int
    score: float
    rank: int


def _rank(fact_ids, scores, k):
    """Orders by descending score, then ascending fact id, and keeps the first k."""
    order = np.lexsort((fact_ids, -scores))[:k]
    return [
        RetrievalResult(fact_id=int(fact_ids[i]), score=float(scores[i]), rank=rank)
        for rank, i in enumerate(order, start=1)
    ]


def cosine_scores(matrix, query):
    """
    Cosine scores of every row against a unit query, in float64 and rounded
    to ``SCORE_DECIMALS`` so equal scores tie exactly.
    """
    scores = np.asarray(matrix, dtype=np.float64) @ np.asarray(query, dtype=np.float64)
    return np.clip(np.round(scores, SCORE_DECIMALS), -1.0, 1.0)


class VectorIndex:
    """
    Immutable (fact_id, embedding) table with exact or approximate search.

    The approximate backend keeps int8 scalar-quantised codes: every entry
    is scored cheaply from the codes, a shortlist of ``max(oversample * k,
    k + 32)`` candidates is kept, and only the shortlist is re-scored with
    the full-precision vectors.
    """

    def __init__(self, fact_ids, matrix, embedder, backend=IndexBackend.EXACT, oversample=4):
        backend = IndexBackend(backend)
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[0] != len(fact_ids):
            raise ValueError("matrix must have one row per fact id")
        if backend is IndexBackend.APPROXIMATE and matrix.shape[0] == 0:
            raise ValueError("the approximate backend needs at least one fact")
        if len(set(int(i) for i in fact_ids)) != len(fact_ids):
            raise ValueError("fact ids must be unique within an index")

        self.backend = backend
        self.embedder = embedder
        self.oversample = oversample
        self.fact_ids = np.asarray(fact_ids, dtype=np.int64)
        self.fact_ids.setflags(write=False)
        self._matrix = matrix
        self._matrix.setflags(write=False)
        self.dim = int(matrix.shape[1]) if matrix.shape[0] else int(embedder.dim or 0)

        if backend is IndexBackend.APPROXIMATE:
            peak = np.abs(matrix).max(axis=0)
            self._scale = np.where(peak > 0, peak / 127.0, 1.0).astype(np.float32)
            self._codes = np.round(matrix / self._scale).astype(np.int8)

    def __len__(self):
        return int(self.fact_ids.shape[0])

    def entries(self):
        """Yields ``(fact_id, Embedding)`` pairs in index order."""
        for fact_id, row in zip(self.fact_ids, self._matrix):
            yield int(fact_id), Embedding(row)

    @property
    def vectors(self):
        return self._matrix

    def search_vector(self, query, k):
        """
        Returns the top-k entries for an already embedded, unit-length query.

        :param query: Query vector of length ``dim``.
        :type query: :class:`numpy.ndarray`
        :param k: Maximum number of results (k >= 1).
        :type k: int
        :rtype: list[:class:`RetrievalResult`]
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if len(self) == 0:
            return []
        query = np.asarray(query, dtype=np.float32)

        if self.backend is IndexBackend.EXACT:
            return _rank(self.fact_ids, cosine_scores(self._matrix, query), k)

        shortlist_size = min(len(self), max(self.oversample * k, k + 32))
        approx = self._codes.astype(np.float32) @ (self._scale * query)
        if shortlist_size < len(self):
            shortlist = np.argpartition(-approx, shortlist_size - 1)[:shortlist_size]
        else:
            shortlist = np.arange(len(self))
        scores = cosine_scores(self._matrix[shortlist], query)
        return _rank(self.fact_ids[shortlist], scores, k)


def build_index(facts, embedder, backend=IndexBackend.EXACT, oversample=4):
    """
    Embeds verbalized facts into a :class:`VectorIndex`.

    :param facts: Statements to index; one entry per fact.
    :type facts: list[:class:`src.core.verbalizer.VerbalizedFact`]
    :param embedder: Any embedder backend.
    :param backend: Exact (brute force) or approximate search.
    :type backend: :class:`IndexBackend` or str
    :rtype: :class:`VectorIndex`
    :raises EmbedderUnavailable: the embedder failed.
    """
    backend = IndexBackend(backend)
    matrix = embedder.embed_batch([f.text for f in facts])
    if not facts:
        matrix = np.zeros((0, embedder.dim or 0), dtype=np.float32)
    index = VectorIndex([f.fact_id for f in facts], matrix, embedder, backend=backend, oversample=oversample)
    logger.info(f"Built {backend.value} index with {len(index)} entries (dim={index.dim})")
    return index


def retrieve(question, index, k=DEFAULT_TOP_K):
    """
    Returns the k facts most similar to ``question``.

    Results are sorted by descending cosine score; equal scores are ordered
    by ascending fact id.

    :param question: Question text.
    :type question: str
    :param index: Index built with :func:`build_index`.
    :type index: :class:`VectorIndex`
    :param k: Maximum number of results.
    :type k: int
    :rtype: list[:class:`RetrievalResult`]
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(index) == 0:
        return []
    return index.search_vector(index.embedder.embed(question).values, k)


class FactRetriever:
    """Store, statements and index bundled for the solver."""

    def __init__(self, store, verbalized, index):
        self.store = store
        self.index = index
        self._text_by_id = {v.fact_id: v.text for v in verbalized}

    @classmethod
    def build(cls, store, embedder, backend=IndexBackend.EXACT, surface_forms=None):
        """Verbalizes ``store`` and indexes every statement."""
        verbalized = verbalize_store(store, surface_forms)
        return cls(store, verbalized, build_index(verbalized, embedder, backend=backend))

    def text_for(self, fact_id):
        return self._text_by_id[fact_id]

    def search(self, question, k=DEFAULT_TOP_K):
        """
        Retrieves facts for a question.

        :return: Ranked results and the matching statements, in rank order.
        :rtype: (list[:class:`RetrievalResult`], list[str])
        """
        results = retrieve(question, self.index, k)
        return results, [self._text_by_id[r.fact_id] for r in results]
