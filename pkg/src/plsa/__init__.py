"""Probabilistic Latent Semantic Analysis fitted by expectation-maximization."""

from .bound import BoundReport, bound_report
from .corpus import (
    Corpus,
    Vocabulary,
    corpus_total_tokens,
    format_uci,
    load_uci,
    parse_uci_bow,
    write_uci,
)
from .em import (
    Responsibilities,
    TrainConfig,
    TrainTrace,
    background_unigram,
    e_step,
    em_iteration,
    em_iteration_bg,
    em_iteration_f1,
    em_iteration_f2,
    em_iteration_modern,
    fold_in,
    log_likelihood,
    m_step,
    posterior_bg,
    posterior_f1,
    posterior_f2,
    posterior_modern,
    train,
)
from .errors import PLSAError
from .model import (
    BackgroundMixture,
    Formulation,
    ModelF1,
    ModelF2,
    f1_to_f2,
    f2_to_f1,
    init_random,
    load_model,
    save_model,
)
from .synthetic import PlantedModel, sample_corpus

__version__ = "0.1.0"
