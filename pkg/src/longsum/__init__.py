"""Extract-then-abstract summarization for long structured documents."""

from .abstractor import (
    ConditioningBundle,
    ConditionError,
    ConditionVariant,
    TinyCausalLM,
    TinyEncoderDecoder,
    build_bundle,
    build_condition,
    generate,
    train_abstractor,
)
from .corpus import (
    CorpusError,
    Document,
    FilterConfig,
    Section,
    SplitAssignment,
    ingest,
    make_split,
    normalize_text,
    split_sentences,
)
from .extractor import (
    ExtractorInput,
    TinyTransformerScorer,
    TrainConfig,
    build_extractor_input,
    extract_summary,
    train_scorer,
)
from .harness import RunConfig, evaluate_abstractive, evaluate_extractive, run_pipeline
from .oracle import GoldExtract, LabeledPair, build_gold_extract, build_pair_dataset
from .paraphrase import Translator, back_translate, register_translator
from .rouge import RougeScore, RougeTriple, avg_f, corpus_average, rouge_l, rouge_n, score_texts
from .vocab import Vocabulary, detokenize, tokenize

__version__ = "0.1.0"

__all__ = [
    "ConditionError",
    "ConditionVariant",
    "ConditioningBundle",
    "CorpusError",
    "Document",
    "ExtractorInput",
    "FilterConfig",
    "GoldExtract",
    "LabeledPair",
    "RougeScore",
    "RougeTriple",
    "RunConfig",
    "Section",
    "SplitAssignment",
    "TinyCausalLM",
    "TinyEncoderDecoder",
    "TinyTransformerScorer",
    "TrainConfig",
    "Translator",
    "Vocabulary",
    "avg_f",
    "back_translate",
    "build_bundle",
    "build_condition",
    "build_extractor_input",
    "build_gold_extract",
    "build_pair_dataset",
    "corpus_average",
    "detokenize",
    "evaluate_abstractive",
    "evaluate_extractive",
    "extract_summary",
    "generate",
    "ingest",
    "make_split",
    "normalize_text",
    "register_translator",
    "rouge_l",
    "rouge_n",
    "run_pipeline",
    "score_texts",
    "split_sentences",
    "tokenize",
    "train_abstractor",
    "train_scorer",
]
