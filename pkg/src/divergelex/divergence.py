"""Scoring of per-group word interpretation differences.

For each candidate word, the top-n neighbor sets from the two group spaces
are projected into the global space as similarity-weighted centroids; the
cosine distance between the centroids is the word's divergence score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Vocabulary
from .embedding import EmbeddingSpace, Neighbor, cosine_similarity, nearest_neighbors
from .errors import EmptyCandidateSetError, EmptyProjectionError, ZeroVectorError


@dataclass
class InterpretingSet:
    """A word's top-n neighbors in one group space, with similarity weights."""

    word: str
    group_tag: str
    neighbors: list[Neighbor]


@dataclass
class WordDivergence:
    word: str
    score: float
    set_1: InterpretingSet
    set_2: InterpretingSet
    dropped_neighbors_1: list[str] = field(default_factory=list)
    dropped_neighbors_2: list[str] = field(default_factory=list)


@dataclass
class DivergenceReport:
    """Ranked divergent words plus run metadata."""

    metadata: dict
    entries: list[WordDivergence]

    def scores(self) -> dict[str, float]:
        return {e.word: e.score for e in self.entries}


def interpreting_set(space: EmbeddingSpace, word: str, n: int) -> InterpretingSet:
    """The word's top-n neighbor set tagged with the space's group."""
    return InterpretingSet(word, space.space_tag, nearest_neighbors(space, word, n))


def weighted_centroid(
    global_space: EmbeddingSpace, iset: InterpretingSet
) -> tuple[np.ndarray, list[str]]:
    """Similarity-weighted average of the set's vectors in the global space.

    cent = sum_i sim_i * v(t_i) / sum_i sim_i over the neighbors found in
    the global vocabulary. Neighbors absent from it are skipped and returned
    as the dropped list; neighbors with similarity <= 0 are excluded from
    the average (weights must be positive).
    """
    vectors = []
    weights = []
    dropped = []
    for nb in iset.neighbors:
        if nb.token not in global_space.vocab:
            dropped.append(nb.token)
            continue
        if nb.similarity <= 0.0:
            continue
        vectors.append(global_space.vector(nb.token))
        weights.append(nb.similarity)
    if not vectors:
        raise EmptyProjectionError(
            f"no neighbor of {iset.word!r} ({iset.group_tag}) projects into "
            f"the global space with positive weight"
        )
    w = np.asarray(weights, dtype=np.float64)
    stacked = np.asarray(vectors, dtype=np.float64)
    centroid = (w[:, None] * stacked).sum(axis=0) / w.sum()
    return centroid, dropped


def divergence_score(
    global_space: EmbeddingSpace,
    set_1: InterpretingSet,
    set_2: InterpretingSet,
) -> float:
    """1 - cosine similarity between the two projected centroids; in [0, 2]."""
    c1, _ = weighted_centroid(global_space, set_1)
    c2, _ = weighted_centroid(global_space, set_2)
    return 1.0 - cosine_similarity(c1, c2)


def candidate_words(
    vocab_1: Vocabulary,
    vocab_2: Vocabulary,
    global_vocab: Vocabulary,
    min_count_each: int = 1,
) -> list[str]:
    """Words in all three vocabularies with count >= min_count_each in both
    group vocabularies, sorted lexicographically."""
    cands = sorted(
        tok
        for tok in vocab_1.tokens
        if tok in vocab_2
        and tok in global_vocab
        and vocab_1.count(tok) >= min_count_each
        and vocab_2.count(tok) >= min_count_each
    )
    if not cands:
        raise EmptyCandidateSetError(
            f"no word is shared by both groups and the global vocabulary "
            f"with count >= {min_count_each}"
        )
    return cands


def rank_divergences(
    space_1: EmbeddingSpace,
    space_2: EmbeddingSpace,
    global_space: EmbeddingSpace,
    n: int = 20,
    top_k: int | None = 100,
    min_count_each: int = 1,
) -> DivergenceReport:
    """Score every candidate word and rank by descending divergence.

    Words whose interpreting sets lose every neighbor in projection (or whose
    centroid degenerates to zero) are skipped and counted in the metadata.
    Ties are broken lexicographically.
    """
    cands = candidate_words(
        space_1.vocab, space_2.vocab, global_space.vocab, min_count_each
    )
    entries: list[WordDivergence] = []
    skipped: list[str] = []
    for word in cands:
        i1 = interpreting_set(space_1, word, n)
        i2 = interpreting_set(space_2, word, n)
        try:
            c1, dropped_1 = weighted_centroid(global_space, i1)
            c2, dropped_2 = weighted_centroid(global_space, i2)
            score = 1.0 - cosine_similarity(c1, c2)
        except (EmptyProjectionError, ZeroVectorError):
            skipped.append(word)
            continue
        entries.append(WordDivergence(word, float(score), i1, i2, dropped_1, dropped_2))
    entries.sort(key=lambda e: (-e.score, e.word))
    if top_k is not None:
        entries = entries[:top_k]
    metadata = {
        "group_1": space_1.space_tag,
        "group_2": space_2.space_tag,
        "global": global_space.space_tag,
        "vocabulary_scope": "per-training-corpus",
        "n": n,
        "top_k": top_k,
        "min_count_each": min_count_each,
        "candidate_count": len(cands),
        "skipped_count": len(skipped),
        "vocab_size_1": len(space_1.vocab),
        "vocab_size_2": len(space_2.vocab),
        "vocab_size_global": len(global_space.vocab),
    }
    return DivergenceReport(metadata, entries)
