"""querysplit: turn one multi-intent user query into several complete,
independently executable single-intent sub-queries.

The package covers the full loop: synthetic corpus construction (junction
fillers sampled from probability tables, candidate pools ranked by
perplexity), the Split / Delete / Complete action pipeline with rule and
backend executors, evaluation metrics (SACC, exact match, BLEU-4, ROUGE-L,
METEOR), dataset persistence, and an HTTP service front end.
"""

from .backends import (
    Backend,
    CachedBackend,
    EchoBackend,
    GenerationRequest,
    GenerationResponse,
    GoldOracleBackend,
    RemoteBackend,
    ScriptedBackend,
    cached,
    generate,
)
from .dataio import (
    DatasetInstance,
    SplitSpec,
    import_concat_corpus,
    instance_from_trace,
    load,
    save,
    split_dataset,
    stats,
)
from .errors import (
    BackendError,
    ConfigError,
    DatasetValidationError,
    MetricNotApplicableError,
    PipelineError,
    QuerySplitError,
)
from .metrics import (
    EvalInstance,
    MetricReport,
    bleu4,
    corpus_bleu4,
    evaluate,
    exact_match,
    make_instance,
    median_report,
    meteor_lite,
    rouge_l,
    sacc,
)
from .pipeline import (
    Action,
    ActionTrace,
    PipelineConfig,
    SegmentedQuery,
    Stage,
    causal_complete,
    combination_configs,
    complete_rule,
    delete_fillers,
    end_to_end_config,
    gold_generation_table,
    parse_model_output,
    run_pipeline,
    split_rule,
    two_stage_causal_config,
    two_stage_once_config,
)
from .synthesizer import (
    ConjunctionTable,
    SynthesisTrace,
    assemble,
    builtin_table,
    sample_fillers,
    synthesize,
    table_for_query_count,
)
from .textkit import (
    CharNGramLM,
    FillerLexicon,
    LexiconEntry,
    default_lexicon,
    match_fillers,
    perplexity,
    preferred_token_mode,
    strip_punctuation,
    tokenize,
    train_char_lm,
)

__version__ = "0.1.0"
