"""Residual-quantization semantic ids: training, diagnostics, mitigation,
and a desk-scale generative-retrieval simulation."""

from .core import (
    Codebook,
    ConfigError,
    ConsistencyError,
    DataError,
    EmbeddingCollection,
    MalformedSequenceError,
    PrefixNotFoundError,
    QuantizerConfig,
    RandomSource,
    RqsidError,
    SemanticId,
    TokenRangeError,
    UndefinedStatError,
    VarLenSemanticId,
    parse_flat_tokens,
    sid_to_flat_tokens,
)
from .datagen import ClusterSpec, gen_clustered, gen_uniform
from .diagnostics import (
    HourglassReport,
    LayerHistogram,
    LayerStats,
    Selector,
    entropy_bits,
    gini,
    head_tail_split,
    hourglass_report,
    path_sparsity,
    stddev,
    token_histogram,
)
from .grsim import (
    CatalogTrie,
    EvalReport,
    Interaction,
    InteractionDataset,
    InteractionSpec,
    SequenceModel,
    beam_search,
    build_trie,
    evaluate,
    gen_interactions,
    train_seq_model,
)
from .mitigation import (
    MitigationOutcome,
    PostMitigationReport,
    elision_capacity,
    exchange_layers,
    post_mitigation_report,
    remove_layer,
    varlen_topk,
)
from .quantizer import (
    KMeansResult,
    ResidualTrace,
    decode,
    encode,
    encode_all,
    kmeans,
    reconstruction_report,
    sids_as_tuples,
    train_rq,
)

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "ConfigError",
    "ConsistencyError",
    "DataError",
    "EmbeddingCollection",
    "MalformedSequenceError",
    "PrefixNotFoundError",
    "QuantizerConfig",
    "RandomSource",
    "RqsidError",
    "SemanticId",
    "TokenRangeError",
    "UndefinedStatError",
    "VarLenSemanticId",
    "parse_flat_tokens",
    "sid_to_flat_tokens",
    "ClusterSpec",
    "gen_clustered",
    "gen_uniform",
    "HourglassReport",
    "LayerHistogram",
    "LayerStats",
    "Selector",
    "entropy_bits",
    "gini",
    "head_tail_split",
    "hourglass_report",
    "path_sparsity",
    "stddev",
    "token_histogram",
    "CatalogTrie",
    "EvalReport",
    "Interaction",
    "InteractionDataset",
    "InteractionSpec",
    "SequenceModel",
    "beam_search",
    "build_trie",
    "evaluate",
    "gen_interactions",
    "train_seq_model",
    "MitigationOutcome",
    "PostMitigationReport",
    "elision_capacity",
    "exchange_layers",
    "post_mitigation_report",
    "remove_layer",
    "varlen_topk",
    "KMeansResult",
    "ResidualTrace",
    "decode",
    "encode",
    "encode_all",
    "kmeans",
    "reconstruction_report",
    "sids_as_tuples",
    "train_rq",
    "__version__",
]
