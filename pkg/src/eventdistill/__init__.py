"""eventdistill: distill event-sequence knowledge from generative language models.

The pipeline generates event sequences guided by an event-concept catalog,
persists and splits the resulting corpora, mines frequent sequential
patterns, learns summary Markov models with influencing-set discovery, and
scores corpus quality with judged precision and reference recall.
"""

__version__ = "0.1.0"

from .backend import (
    BackendConfig,
    BackendError,
    Completion,
    HttpBackend,
    SamplingParams,
    ScriptedBackend,
    make_backend,
    parse_yes_no,
)
from .catalog import (
    CatalogError,
    CausalPair,
    ConceptCatalog,
    EventConcept,
    load_catalog,
    normalize_label,
)
from .evaluation import (
    MetricsReport,
    PairJudgment,
    adjacent_pairs,
    assemble_report,
    f1,
    precision,
    recall,
)
from .generation import (
    Corpus,
    GeneratedSequence,
    GeneratorConfig,
    corpus_stats,
    generate_corpus,
    generate_sequence,
)
from .mining import (
    SequenceDatabase,
    SequentialPattern,
    brute_force_mine,
    gsp,
    is_subsequence,
    spade,
)
from .prompts import (
    PromptText,
    build_iterative_prompt,
    build_precision_prompt,
    build_trigger_prompt,
)
from .store import SplitSpec, load_corpus, save_corpus, split
from .summ import (
    LogLossReport,
    MarkovModel,
    SummConfig,
    SummModel,
    fit,
    learn,
    log_loss,
    markov_baseline,
    planted_binary_model,
    score,
    simulate,
    summarize,
)

__all__ = [
    "__version__",
    "BackendConfig",
    "BackendError",
    "CatalogError",
    "CausalPair",
    "Completion",
    "ConceptCatalog",
    "Corpus",
    "EventConcept",
    "GeneratedSequence",
    "GeneratorConfig",
    "HttpBackend",
    "LogLossReport",
    "MarkovModel",
    "MetricsReport",
    "PairJudgment",
    "PromptText",
    "SamplingParams",
    "ScriptedBackend",
    "SequenceDatabase",
    "SequentialPattern",
    "SplitSpec",
    "SummConfig",
    "SummModel",
    "adjacent_pairs",
    "assemble_report",
    "brute_force_mine",
    "build_iterative_prompt",
    "build_precision_prompt",
    "build_trigger_prompt",
    "corpus_stats",
    "f1",
    "fit",
    "generate_corpus",
    "generate_sequence",
    "gsp",
    "is_subsequence",
    "learn",
    "load_catalog",
    "load_corpus",
    "log_loss",
    "make_backend",
    "markov_baseline",
    "normalize_label",
    "parse_yes_no",
    "planted_binary_model",
    "precision",
    "recall",
    "save_corpus",
    "score",
    "simulate",
    "spade",
    "split",
    "summarize",
]
