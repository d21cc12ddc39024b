from .embeddings import EmbeddingTable, build_sentences, cosine, train_product_embeddings
from .matrix import (
    FeatureMatrix,
    FeatureVector,
    assemble_feature_matrix,
    assemble_training_matrix,
    feature_columns,
)
from .panel import (
    ENGINEERED_COLUMNS,
    OBSERVED_COLUMNS,
    attach_sort_rank,
    build_engineered_features,
    build_observed_features,
    build_panel,
)

__all__ = [
    "EmbeddingTable", "FeatureMatrix", "FeatureVector", "ENGINEERED_COLUMNS", "OBSERVED_COLUMNS",
    "assemble_feature_matrix", "assemble_training_matrix", "attach_sort_rank",
    "build_engineered_features", "build_observed_features", "build_panel", "build_sentences",
    "cosine", "feature_columns", "train_product_embeddings",
]
