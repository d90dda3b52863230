from ._core import (
    Embedding,
    Graph,
    IoError,
    ValidationError,
    bleu4,
    build_index,
    cosine,
    heat_wavelets,
    laplacian,
    load_graph,
    pearson,
    proximity_embedding,
    proximity_similarity,
    role_distance,
    role_embedding,
    rouge_l,
    run_cli,
    tokenize,
)

__version__ = "0.1.0"
