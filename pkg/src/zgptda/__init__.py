"""Scaling-law conformity analysis and Z-number guided text augmentation.

The library measures how closely a text corpus follows eight statistical
regularities of natural language (rank-frequency, vocabulary growth,
count-variance scaling, block entropy, character-variance scaling,
sentence/word length coupling, first-digit frequencies, and multifractal
fluctuation scaling), and uses the per-law goodness-of-fit metrics to score
LLM-generated paraphrases for data augmentation.
"""

__version__ = "0.1.0"

from .corpus import Document, LoadError, TokenStream, first_digits, load_jsonl, tokenize
from .fitkit import (
    ConformityVerdict,
    EmpiricalSeries,
    FitMetrics,
    LawFit,
    NotFittable,
    fit_benford,
    fit_loglog,
    fit_metrics,
)
from .laws import LawReport, evaluate_all
from .mfdfa import (
    EmbeddingProvider,
    FileVectorEmbedder,
    HashedTrigramEmbedder,
    MultifractalSpectrum,
    ProviderError,
    ScalarSeries,
    build_series,
    mandelbrot_conformity,
    profile,
    run_mfdfa,
)
from .zscore import NoSignal, Suitability, ZNumber, aggregate, grade_metric, infer_suitability, law_vector
from .augment import (
    AugmentationRun,
    GenerationConfig,
    MockTransport,
    PartialGeneration,
    ReplayTransport,
    ScoredInstance,
    TransportError,
    compare_corpora,
    emit_dataset,
    generate_instances,
    score_instance,
    select_augmented,
)

__all__ = [
    "Document",
    "TokenStream",
    "LoadError",
    "load_jsonl",
    "tokenize",
    "first_digits",
    "EmpiricalSeries",
    "LawFit",
    "FitMetrics",
    "ConformityVerdict",
    "NotFittable",
    "fit_loglog",
    "fit_benford",
    "fit_metrics",
    "LawReport",
    "evaluate_all",
    "EmbeddingProvider",
    "HashedTrigramEmbedder",
    "FileVectorEmbedder",
    "ProviderError",
    "ScalarSeries",
    "MultifractalSpectrum",
    "build_series",
    "profile",
    "run_mfdfa",
    "mandelbrot_conformity",
    "ZNumber",
    "Suitability",
    "NoSignal",
    "grade_metric",
    "law_vector",
    "aggregate",
    "infer_suitability",
    "GenerationConfig",
    "ScoredInstance",
    "AugmentationRun",
    "MockTransport",
    "ReplayTransport",
    "TransportError",
    "PartialGeneration",
    "generate_instances",
    "score_instance",
    "select_augmented",
    "emit_dataset",
    "compare_corpora",
]
