"""attack2cve: link attack descriptions to CVE records via embedding similarity."""

from .corpus import (
    ATTACK_KINDS,
    Corpus,
    CorpusEntry,
    CorpusError,
    DuplicateEntryError,
    EntryId,
    EntryKind,
    NewsReport,
    extract_cve_ids,
    load_corpus,
    parse_corpus,
    save_corpus,
    serialize_corpus,
)
from .embedding import (
    EmbeddingError,
    EmbeddingStore,
    HashingProvider,
    RemoteProvider,
    StoreError,
    embed_batch,
    embed_corpus,
    embed_text,
    load_store,
    provider_from_spec,
    save_store,
)
from .linkgraph import (
    GroundTruthMap,
    LinkGraph,
    LinkStats,
    annotate_all,
    annotate_attack,
    build_link_graph,
)
from .metrics import (
    ConfusionCounts,
    MetricsError,
    OverlapMetrics,
    UncoveredPolicy,
    classify_attacks,
    f1_score,
    overlap,
    pr_sweep,
    prf,
    roc_sweep,
    topk_sweep,
)
from .news import (
    MatchCategory,
    MethodInapplicable,
    NewsError,
    evaluate_news,
    m2_threshold,
    m3_first_cve,
    m4_all_cves,
    match_mentions,
    predict_from_news,
)
from .preprocess import CleaningReport, clean_only, clean_text
from .similarity import (
    PredictionSet,
    SimilarityError,
    SimilarityKind,
    cosine,
    display_score,
    predict_set,
    rank_cves,
    scaled_score,
)

__version__ = "0.1.0"
