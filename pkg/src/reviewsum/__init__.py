"""Toolkit for summarizing mobile app review streams.

Reviews are ranked by informativeness (term-frequency times inverse document
frequency), sampled proportionally to their star-rating mix, summarized with
chain-of-density or plain prompting against any chat-completion endpoint (or
an offline mock), compared against an extractive baseline, and evaluated by
entity density, recall, readability, and the accompanying statistics.
"""

from .corpus import (
    Lemmatizer,
    Review,
    ReviewCorpus,
    TokenBag,
    filter_english,
    ingest,
    load_stopwords,
    normalize,
    save_corpus,
    tokenize_bag,
    tokenize_corpus,
)
from .evaluation import (
    EntityAnnotation,
    GoldEntitySet,
    aggregate_entity_table,
    density,
    extract_entities_llm,
    parse_readability_rating,
    readability_prompt,
    recall,
)
from .extractive import (
    EmbeddingTable,
    ExtractiveConfig,
    SentenceUnit,
    cosine,
    embed_sentence,
    load_embeddings,
    split_sentences,
    summarize_extractive,
)
from .language import TrigramLanguageDetector, detect
from .llm import (
    MOCK_ENDPOINT,
    CompletionResult,
    ContextLengthError,
    GenerationParams,
    Price,
    ProviderEndpoint,
    TransportError,
    UsageRecord,
    cached_complete,
    complete,
    estimate_cost,
)
from .prompts import (
    PromptTemplate,
    SummaryChain,
    load_template,
    parse_cod_response,
    parse_vanilla_response,
    render,
)
from .ranking import ScoredReview, TfIdfModel, fit, rank, score_review, term_weight
from .sampling import SamplingPlan, StratifiedSample, allocate, select
from .stats import ContingencyTable, StatResult, chi_square, paired_t

__version__ = "0.1.0"
