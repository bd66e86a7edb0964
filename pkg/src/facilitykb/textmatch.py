"""Character-trigram TF-IDF space and top-K candidate retrieval.

Weights are raw trigram counts times a smoothed idf,
``ln((1 + n_docs) / (1 + df)) + 1``. Trigrams are taken from the normalized
text (see :func:`facilitykb.core.normalize_name`) without padding, and only
trigrams occurring in at least ``min_df`` aliases are kept.

Retrieval scores are rounded to ``SCORE_DECIMALS`` places so that rankings
and threshold tests do not depend on floating-point summation order.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .core import normalize_name

MIN_DF = 10
DEFAULT_K = 10
SCORE_DECIMALS = 9


def quantize(score: float) -> float:
    return round(float(score), SCORE_DECIMALS)


def trigrams(text: str) -> list[str]:
    norm = normalize_name(text)
    return [norm[i : i + 3] for i in range(len(norm) - 2)]


@dataclass(frozen=True)
class TrigramVocabulary:
    term_to_index: dict[str, int]
    doc_freq: tuple[int, ...]
    n_docs: int
    idf: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.term_to_index)

    def df(self, term: str) -> int:
        idx = self.term_to_index.get(term)
        return 0 if idx is None else self.doc_freq[idx]


def build_vocabulary(aliases: Sequence[str], min_df: int = MIN_DF) -> TrigramVocabulary:
    """Count, per trigram, how many aliases contain it, and keep the frequent ones.

    Term indices follow sorted term order, so the result does not depend on
    the order of ``aliases``.
    """
    df: Counter[str] = Counter()
    for text in aliases:
        df.update(set(trigrams(text)))
    kept = sorted(t for t, c in df.items() if c >= min_df)
    n = len(aliases)
    doc_freq = tuple(df[t] for t in kept)
    idf = tuple(math.log((1 + n) / (1 + d)) + 1.0 for d in doc_freq)
    return TrigramVocabulary({t: i for i, t in enumerate(kept)}, doc_freq, n, idf)


@dataclass(frozen=True)
class SparseVector:
    indices: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()
    norm: float = 0.0

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        items = sorted((i, w) for i, w in pairs if w != 0)
        if not items:
            return cls()
        idx, wts = zip(*items)
        return cls(tuple(idx), tuple(wts), math.sqrt(math.fsum(w * w for w in wts)))

    def __bool__(self) -> bool:
        return bool(self.indices)

    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices, self.weights))


def vectorize(text: str, vocab: TrigramVocabulary) -> SparseVector:
    counts = Counter(trigrams(text))
    pairs = []
    for term, tf in counts.items():
        idx = vocab.term_to_index.get(term)
        if idx is not None:
            pairs.append((idx, tf * vocab.idf[idx]))
    return SparseVector.from_pairs(pairs)


def cosine(u: SparseVector, v: SparseVector) -> float:
    """Cosine of two non-negative sparse vectors; 0 when either is empty."""
    if not u or not v:
        return 0.0
    if u.indices == v.indices and u.weights == v.weights:
        return 1.0
    i = j = 0
    terms = []
    ui, vi = u.indices, v.indices
    while i < len(ui) and j < len(vi):
        if ui[i] == vi[j]:
            terms.append(u.weights[i] * v.weights[j])
            i += 1
            j += 1
        elif ui[i] < vi[j]:
            i += 1
        else:
            j += 1
    if not terms:
        return 0.0
    return min(1.0, max(0.0, math.fsum(terms) / (u.norm * v.norm)))


class IndexMode(enum.Enum):
    EXACT = "EXACT"
    APPROXIMATE = "APPROXIMATE"


def _unit_rows(vectors: Sequence[SparseVector], n_terms: int) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        if vec:
            indices.extend(vec.indices)
            data.extend(w / vec.norm for w in vec.weights)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), indptr),
        shape=(len(vectors), max(n_terms, 1)),
    )


class CandidateIndex:
    """Inverted index over aliases, each alias owned by one entity.

    Owners must be hashable and mutually comparable; ties in retrieval are
    broken by ascending owner. In EXACT mode every alias sharing a trigram
    with the query is scored. APPROXIMATE mode only follows the postings of
    the query's heaviest trigrams (those carrying ``approx_mass`` of the
    query's squared norm) and then scores the reached aliases exactly.
    """

    def __init__(
        self,
        vocab: TrigramVocabulary,
        items: Iterable[tuple[Hashable, str]],
        mode: IndexMode = IndexMode.EXACT,
        approx_mass: float = 0.6,
    ):
        self.vocab = vocab
        self.mode = mode
        self.approx_mass = approx_mass
        pairs = sorted(items, key=lambda it: (it[0], it[1]))
        self.owners: list = sorted({owner for owner, _ in pairs})
        owner_pos = {owner: i for i, owner in enumerate(self.owners)}
        self.alias_texts: list[str] = [text for _, text in pairs]
        self.alias_owner = np.asarray([owner_pos[o] for o, _ in pairs], dtype=np.int64)
        self.vectors: list[SparseVector] = [vectorize(t, vocab) for t in self.alias_texts]
        self.matrix = _unit_rows(self.vectors, len(vocab))
        # Postings: term -> alias rows, via the transposed matrix.
        self.postings = self.matrix.T.tocsr()
        # Aliases are grouped by owner, so owner maxima reduce over contiguous runs.
        self._owner_starts = np.searchsorted(self.alias_owner, np.arange(len(self.owners)))
        self._query_cache: dict[str, SparseVector] = {}

    def __len__(self) -> int:
        return len(self.alias_texts)

    def query_vector(self, text: str) -> SparseVector:
        vec = self._query_cache.get(text)
        if vec is None:
            vec = vectorize(text, self.vocab)
            self._query_cache[text] = vec
        return vec

    def alias_scores(self, texts: Sequence[str]) -> np.ndarray:
        """Quantized cosine of each query text against every indexed alias.

        Returns an array of shape ``(len(texts), len(self))``. In APPROXIMATE
        mode aliases not reached through the pruned postings score 0.
        """
        if not len(self):
            return np.zeros((len(texts), 0))
        q = _unit_rows([self.query_vector(t) for t in texts], len(self.vocab))
        if self.mode is IndexMode.EXACT:
            raw = (q @ self.matrix.T).toarray()
        else:
            raw = np.zeros((len(texts), len(self)))
            for r in range(q.shape[0]):
                rows = self._reachable(q, r)
                if len(rows):
                    raw[r, rows] = (self.matrix[rows] @ q[r].T).toarray().ravel()
        np.clip(raw, 0.0, 1.0, out=raw)
        return np.round(raw, SCORE_DECIMALS)

    def _reachable(self, q: sp.csr_matrix, row: int) -> np.ndarray:
        """Alias rows sharing one of the heaviest terms of query ``row``."""
        start, end = q.indptr[row], q.indptr[row + 1]
        cols, vals = q.indices[start:end], q.data[start:end]
        if len(cols) == 0:
            return np.zeros(0, dtype=np.int64)
        order = np.lexsort((cols, -vals))
        mass = np.cumsum(vals[order] ** 2)
        cut = int(np.searchsorted(mass, self.approx_mass * mass[-1])) + 1
        post = self.postings
        lists = [post.indices[post.indptr[t] : post.indptr[t + 1]] for t in cols[order[:cut]]]
        return np.unique(np.concatenate(lists))

    def owner_scores(self, texts: Sequence[str]) -> np.ndarray:
        """Best alias score per owner over all query texts, shape ``(n_owners,)``."""
        if not len(self) or not texts:
            return np.zeros(len(self.owners))
        best = self.alias_scores(texts).max(axis=0)
        return np.maximum.reduceat(best, self._owner_starts)

    def topk(self, query, k: int = DEFAULT_K) -> list[tuple[Hashable, float]]:
        """Top ``k`` owners by best alias cosine, descending, ties by ascending owner.

        ``query`` is a single text or a sequence of texts (a multi-alias
        record); owners with score 0 are never returned.
        """
        if k <= 0:
            raise ValueError("k must be positive")
        texts = [query] if isinstance(query, str) else list(query)
        scores = self.owner_scores(texts)
        order = np.lexsort((np.arange(len(scores)), -scores))
        out = []
        for pos in order[:k]:
            if scores[pos] <= 0.0:
                break
            out.append((self.owners[pos], float(scores[pos])))
        return out


def build_index(
    items: Sequence[tuple[Hashable, str]],
    mode: IndexMode = IndexMode.EXACT,
    min_df: int = MIN_DF,
    vocab: Optional[TrigramVocabulary] = None,
) -> CandidateIndex:
    """Build a vocabulary over the item texts (unless given) and index them."""
    if vocab is None:
        vocab = build_vocabulary([text for _, text in items], min_df=min_df)
    return CandidateIndex(vocab, items, mode=mode)


def topk(query, index: CandidateIndex, k: int = DEFAULT_K) -> list[tuple[Hashable, float]]:
    return index.topk(query, k)
