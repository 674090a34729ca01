"""End-to-end orchestration: clean -> train three spaces -> rank."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import (
    LabeledDocument,
    TokenizedDocument,
    clean_document,
    split_by_group,
    token_lists,
)
from .divergence import DivergenceReport, rank_divergences
from .embedding import EmbeddingSpace, TrainingConfig, train


@dataclass
class PipelineResult:
    report: DivergenceReport
    space_1: EmbeddingSpace
    space_2: EmbeddingSpace
    global_space: EmbeddingSpace
    cleaning_stats: Counter


def clean_corpus(
    docs: Iterable[LabeledDocument], stats: Counter | None = None
) -> list[TokenizedDocument]:
    cleaned = []
    for doc in docs:
        out = clean_document(doc, stats)
        if out is not None:
            cleaned.append(out)
    return cleaned


def run_pipeline(
    docs: Sequence[LabeledDocument],
    config: TrainingConfig,
    n: int = 20,
    top_k: int | None = 100,
    min_count_each: int = 1,
    threads: int = 1,
) -> PipelineResult:
    """Clean labeled documents, train both group spaces and the combined
    global space with one seed, and rank divergent words."""
    stats: Counter = Counter()
    cleaned = clean_corpus(docs, stats)
    grouped = split_by_group(cleaned)
    tag_1, tag_2 = grouped.tags
    space_1 = train(
        token_lists(grouped.per_group[tag_1]), config, space_tag=tag_1, threads=threads
    )
    space_2 = train(
        token_lists(grouped.per_group[tag_2]), config, space_tag=tag_2, threads=threads
    )
    global_space = train(
        token_lists(grouped.combined),
        config,
        space_tag=f"{tag_1}+{tag_2}",
        threads=threads,
    )
    report = rank_divergences(
        space_1,
        space_2,
        global_space,
        n=n,
        top_k=top_k,
        min_count_each=min_count_each,
    )
    report.metadata["training_config"] = config.to_dict()
    report.metadata["cleaning_stats"] = dict(stats)
    return PipelineResult(report, space_1, space_2, global_space, stats)
