"""divergelex: detect words that two groups of people interpret differently.

Per-group skip-gram embedding spaces give each word a top-n neighbor set per
group; the cosine distance between the sets' similarity-weighted centroids in
a combined-corpus space ranks the words by interpretation divergence.
"""

from .corpus import (
    LabeledDocument,
    TokenizedDocument,
    Vocabulary,
    build_vocabulary,
    clean_document,
    tokenize,
)
from .divergence import (
    DivergenceReport,
    InterpretingSet,
    WordDivergence,
    divergence_score,
    interpreting_set,
    rank_divergences,
    weighted_centroid,
)
from .embedding import (
    EmbeddingSpace,
    Neighbor,
    TrainingConfig,
    cosine_similarity,
    load_space,
    nearest_neighbors,
    save_space,
    train,
)
from .pipeline import run_pipeline
from .synth import PlantedTruth, SynthSpec, evaluate, generate

__version__ = "0.1.0"
