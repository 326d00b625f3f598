"""Cross-modal place recognition: retrieval-side python surface."""

from ._core import (
    ConfigError,
    DataError,
    DistanceKind,
    EmbeddingIndex,
    IndexEntry,
    Modality,
    NumericError,
    Pose,
    QueryHit,
    distance,
    generate_benchmark,
    is_same_place,
    one_percent_k,
    place_distance,
    place_of_sample,
    read_evdb,
    write_evdb,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DistanceKind",
    "EmbeddingIndex",
    "IndexEntry",
    "Modality",
    "NumericError",
    "Pose",
    "QueryHit",
    "distance",
    "generate_benchmark",
    "is_same_place",
    "one_percent_k",
    "place_distance",
    "place_of_sample",
    "read_evdb",
    "write_evdb",
]
