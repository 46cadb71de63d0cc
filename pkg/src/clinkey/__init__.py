"""Predictive-keyboard workbench for clinical-style text."""

from .corpus import (
    BOS_TOKEN,
    DEID_TOKEN,
    OOV_TOKEN,
    PreprocessConfig,
    RawCorpus,
    TokenStream,
    Vocabulary,
    build_vocabulary,
    encode_and_split,
    load_corpus,
    load_split,
    load_vocabulary,
    normalize_and_tokenize,
    sample_reports,
    save_split,
    save_vocabulary,
)
from .errors import ClinkeyError, ConfigurationError, DataError, NumericError
from .evaluation import (
    EvalConfig,
    EvalReport,
    SweepCurve,
    benchmark_suite,
    evaluate,
    frequent_vocab_sweep,
)
from .ngram import NgramModel, Prediction, load_ngram, save_ngram, train_ngram
from .neural import (
    AdamConfig,
    NeuralConfig,
    NeuralModel,
    TrainingLog,
    load_neural,
    loss_and_gradients,
    save_neural,
)
from .neural import train as train_neural

__version__ = "0.1.0"
