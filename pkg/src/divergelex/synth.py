"""Synthetic two-group corpora with planted interpretation divergences.

Each topic owns a disjoint vocabulary slice with a Zipfian distribution and
every document is drawn from a single topic. A planted word is injected into
one topic's documents in group 1 and a different topic's documents in group
2; a control word gets the same topic in both groups. Recovering the planted
words from the divergence ranking is the pipeline's end-to-end check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import LabeledDocument, TokenizedDocument
from .divergence import DivergenceReport
from .errors import InfeasibleSpecError

# Per-occurrence probability of one injected word inside its topic's
# documents; total injected mass per topic is capped below this ceiling.
SPECIAL_WORD_PROB = 0.02
MAX_SPECIAL_MASS = 0.3


@dataclass(frozen=True)
class SynthSpec:
    vocab_size: int = 2000
    num_topics: int = 10
    planted_words: int = 20
    control_words: int = 20
    docs_per_group: int = 20000
    doc_length: int = 15
    seed: int = 1

    def __post_init__(self):
        if self.doc_length < 10:
            raise InfeasibleSpecError(
                "doc_length must be >= 10 to survive corpus cleaning"
            )
        if self.num_topics < 1 or self.docs_per_group < 1:
            raise InfeasibleSpecError("num_topics and docs_per_group must be >= 1")
        if self.planted_words < 0 or self.control_words < 0:
            raise InfeasibleSpecError("word counts must be >= 0")
        if self.planted_words > 0 and self.num_topics < 2:
            raise InfeasibleSpecError("planted words need at least 2 topics")
        base = self.vocab_size - self.planted_words - self.control_words
        if base < self.num_topics:
            raise InfeasibleSpecError(
                f"vocab_size={self.vocab_size} leaves {base} topic words for "
                f"{self.num_topics} topics"
            )


@dataclass
class PlantedTruth:
    """Ground-truth assignments: planted word -> (topic in group 1, topic in
    group 2), control word -> shared topic."""

    planted: dict[str, tuple[int, int]]
    controls: dict[str, int]


@dataclass
class SynthEvalMetrics:
    auc: float
    median_planted_rank: float
    median_planted_score: float
    control_p95_score: float
    planted_top_decile_fraction: float
    candidate_count: int
    planted_missing: int
    control_missing: int

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "median_planted_rank": self.median_planted_rank,
            "median_planted_score": self.median_planted_score,
            "control_p95_score": self.control_p95_score,
            "planted_top_decile_fraction": self.planted_top_decile_fraction,
            "candidate_count": self.candidate_count,
            "planted_missing": self.planted_missing,
            "control_missing": self.control_missing,
        }


def _topic_slices(spec: SynthSpec) -> list[list[str]]:
    base = spec.vocab_size - spec.planted_words - spec.control_words
    sizes = [base // spec.num_topics] * spec.num_topics
    for t in range(base % spec.num_topics):
        sizes[t] += 1
    return [[f"t{t}w{i}" for i in range(sizes[t])] for t in range(spec.num_topics)]


def _group_docs(
    spec: SynthSpec,
    group_tag: str,
    topic_words: list[list[str]],
    specials_by_topic: list[list[str]],
    rng: np.random.Generator,
) -> list[TokenizedDocument]:
    """Draw this group's documents; one rng call for topics, one per topic."""
    topic_of_doc = rng.integers(spec.num_topics, size=spec.docs_per_group)
    docs: list[tuple[str, ...] | None] = [None] * spec.docs_per_group
    for t in range(spec.num_topics):
        rows = np.nonzero(topic_of_doc == t)[0]
        specials = specials_by_topic[t]
        base = topic_words[t]
        q = min(SPECIAL_WORD_PROB, MAX_SPECIAL_MASS / max(1, len(specials)))
        zipf = 1.0 / np.arange(1, len(base) + 1)
        zipf *= (1.0 - q * len(specials)) / zipf.sum()
        probs = np.concatenate([np.full(len(specials), q), zipf])
        words = specials + base
        cumulative = np.cumsum(probs)
        cumulative[-1] = 1.0
        draws = rng.random((rows.size, spec.doc_length))
        ids = np.searchsorted(cumulative, draws)
        for row, doc_ids in zip(rows, ids):
            docs[row] = tuple(words[j] for j in doc_ids)
    return [TokenizedDocument(group_tag, toks) for toks in docs]


def generate(
    spec: SynthSpec, group_tags: tuple[str, str] = ("g1", "g2")
) -> tuple[list[TokenizedDocument], list[TokenizedDocument], PlantedTruth]:
    """Generate the two group corpora and the planted ground truth.

    Deterministic for a fixed spec; a planted word occurs only in documents
    of its per-group topic, so its context vocabulary is unambiguous.
    """
    rng = np.random.default_rng(spec.seed)
    topic_words = _topic_slices(spec)

    planted: dict[str, tuple[int, int]] = {}
    for i in range(spec.planted_words):
        t1 = int(rng.integers(spec.num_topics))
        t2 = int((t1 + 1 + rng.integers(spec.num_topics - 1)) % spec.num_topics)
        planted[f"planted{i:03d}"] = (t1, t2)
    controls = {
        f"control{i:03d}": int(rng.integers(spec.num_topics))
        for i in range(spec.control_words)
    }
    truth = PlantedTruth(planted, controls)

    specials_g1: list[list[str]] = [[] for _ in range(spec.num_topics)]
    specials_g2: list[list[str]] = [[] for _ in range(spec.num_topics)]
    for word, (t1, t2) in planted.items():
        specials_g1[t1].append(word)
        specials_g2[t2].append(word)
    for word, t in controls.items():
        specials_g1[t].append(word)
        specials_g2[t].append(word)

    corpus_1 = _group_docs(spec, group_tags[0], topic_words, specials_g1, rng)
    corpus_2 = _group_docs(spec, group_tags[1], topic_words, specials_g2, rng)
    return corpus_1, corpus_2, truth


def as_labeled(docs: list[TokenizedDocument]) -> list[LabeledDocument]:
    """Render synthetic documents as raw text so they pass through the real
    cleaning pipeline."""
    return [LabeledDocument(d.group_tag, " ".join(d.tokens)) for d in docs]


def _mid_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks by descending score, ties sharing their average rank."""
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def evaluate(report: DivergenceReport, truth: PlantedTruth) -> SynthEvalMetrics:
    """Score how well the report separates planted from control words.

    Words missing from the report count as misses: they get a score below
    every attainable divergence and a rank past the last entry. The AUC is
    the mid-rank Mann-Whitney statistic, so it is invariant to the report's
    tie order.
    """
    scores = report.scores()
    miss_score = -1.0
    planted_scores = np.array(
        [scores.get(w, miss_score) for w in truth.planted], dtype=np.float64
    )
    control_scores = np.array(
        [scores.get(w, miss_score) for w in truth.controls], dtype=np.float64
    )
    planted_missing = int((planted_scores == miss_score).sum())
    control_missing = int((control_scores == miss_score).sum())

    n_p, n_c = planted_scores.size, control_scores.size
    if n_p and n_c:
        combined = np.concatenate([planted_scores, control_scores])
        ranks_desc = _mid_ranks(combined)
        ascending = combined.size + 1 - ranks_desc
        rank_sum = ascending[:n_p].sum()
        auc = float((rank_sum - n_p * (n_p + 1) / 2) / (n_p * n_c))
    else:
        auc = float("nan")

    all_scores = np.array([e.score for e in report.entries], dtype=np.float64)
    n_entries = all_scores.size
    if n_p:
        entry_ranks = _mid_ranks(all_scores)
        rank_of = {e.word: entry_ranks[i] for i, e in enumerate(report.entries)}
        planted_ranks = np.array(
            [rank_of.get(w, float(n_entries + 1)) for w in truth.planted]
        )
        median_rank = float(np.median(planted_ranks))
        median_score = float(np.median(planted_scores))
        decile_fraction = float((planted_ranks <= 0.1 * n_entries).mean())
    else:
        median_rank = float("nan")
        median_score = float("nan")
        decile_fraction = float("nan")

    present_controls = control_scores[control_scores != miss_score]
    control_p95 = (
        float(np.quantile(present_controls, 0.95))
        if present_controls.size
        else float("nan")
    )
    return SynthEvalMetrics(
        auc=auc,
        median_planted_rank=median_rank,
        median_planted_score=median_score,
        control_p95_score=control_p95,
        planted_top_decile_fraction=decile_fraction,
        candidate_count=n_entries,
        planted_missing=planted_missing,
        control_missing=control_missing,
    )
