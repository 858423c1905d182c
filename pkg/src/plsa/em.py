"""E-steps, M-steps, likelihoods, the training loop and fold-in.

Every formulation shares one pass over the corpus: for a batch of (d, w)
entries the per-topic joint terms are formed, normalized into the topic
posterior P(z|w,d) and immediately folded into count-weighted
accumulators.  Responsibilities are therefore never held for the whole
corpus during training; :func:`e_step` materializes them only for
diagnostics.

Batches are processed in entry order and merged sequentially, so results
are bit-identical across runs for a given ``batch_size``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .corpus import Corpus, corpus_total_tokens
from .errors import (
    DeadTopicError,
    DegeneratePosteriorError,
    PLSAError,
    ValidationError,
    ZeroDensityError,
)
from .model import (
    INIT_EPS,
    UPDATE_TOL,
    BackgroundMixture,
    Formulation,
    Model,
    ModelF1,
    ModelF2,
    _random_rows,
    f2_to_f1,
    init_random,
)

log = logging.getLogger(__name__)

DEFAULT_BATCH = 1 << 16


@dataclass
class Responsibilities:
    """Posteriors aligned with ``corpus`` entry order.

    ``topic_post[i]`` is P(z|w,d) for entry i (conditional on the topic
    branch for background models); ``bg_post[i]`` is the background
    responsibility, present only for background models.
    """

    topic_post: np.ndarray
    bg_post: Optional[np.ndarray] = None


@dataclass
class TrainConfig:
    n_topics: int
    formulation: Union[str, Formulation] = "modern"
    max_iters: int = 200
    rel_tol: float = 1e-6
    seed: int = 0
    lambda_b: Optional[float] = None
    reseat_dead_topics: bool = False
    batch_size: int = DEFAULT_BATCH

    def __post_init__(self):
        self.formulation = Formulation.parse(self.formulation)
        if int(self.n_topics) != self.n_topics or self.n_topics < 1:
            raise ValidationError(f"n_topics must be a positive integer, got {self.n_topics!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValidationError(f"max_iters must be >= 0, got {self.max_iters!r}")
        if not self.rel_tol > 0:
            raise ValidationError(f"rel_tol must be > 0, got {self.rel_tol!r}")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.formulation.is_background:
            if self.lambda_b is None:
                raise ValidationError(f"formulation {self.formulation.cli_name} requires lambda_b")
            if not 0.0 <= self.lambda_b <= 1.0:
                raise ValidationError(f"lambda_b must lie in [0, 1], got {self.lambda_b!r}")
        elif self.lambda_b is not None:
            raise ValidationError("lambda_b is only valid for background formulations")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    loglik: float
    wall_time: float


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)

    def append(self, iteration, loglik, wall_time):
        self.records.append(TraceRecord(iteration, float(loglik), wall_time))

    @property
    def logliks(self) -> np.ndarray:
        return np.array([r.loglik for r in self.records])

    def __len__(self):
        return len(self.records)

    def is_monotone(self, slack=1e-9) -> bool:
        ll = self.logliks
        return bool(np.all(ll[1:] >= ll[:-1] - slack))

    def to_csv(self) -> str:
        lines = ["iteration,loglik"]
        lines += [f"{r.iteration},{r.loglik:.17g}" for r in self.records]
        return "\n".join(lines) + "\n"


# -- per-entry terms -------------------------------------------------------

def _topic_terms(model, d, w):
    """Per-topic joint terms and the factor that turns their sum into the topic density.

    Modern / F1: phi[z,w] * theta[d,z], scaled by P(d) (1 for modern).
    F2: P(w|z) P(d|z) P(z), scale 1.
    """
    if isinstance(model, ModelF1):
        joint = model.phi[:, w].T * model.theta[d]
        scale = None if model.modern else model.p_d[d]
    else:
        joint = model.phi[:, w].T * model.p_d_given_z[:, d].T * model.p_z
        scale = None
    return joint, scale


def _posteriors(model: Model, d, w):
    """E-step for a batch of entries.

    Returns ``(topic_post, bg_post, density)``; ``bg_post`` is None for
    models without a background component.
    """
    if isinstance(model, BackgroundMixture):
        if model.p_w_bg is None:
            raise ValidationError("background unigram not set; call background_unigram first")
        joint, scale = _topic_terms(model.base, d, w)
        s = joint.sum(axis=1)
        topic_density = s if scale is None else scale * s
        lam = model.lambda_b
        bg_part = lam * model.p_w_bg[w]
        density = bg_part + (1.0 - lam) * topic_density
        if np.any(density <= 0):
            i = int(np.flatnonzero(density <= 0)[0])
            raise ZeroDensityError(d[i], w[i])
        bg_post = bg_part / density
        # A zero topic branch leaves P(z|w,d, not background) undefined; it is
        # filled uniformly and carries zero weight because bg_post is then 1.
        T = joint.shape[1]
        topic_post = np.full_like(joint, 1.0 / T)
        ok = s > 0
        topic_post[ok] = joint[ok] / s[ok, None]
        return topic_post, bg_post, density

    joint, scale = _topic_terms(model, d, w)
    s = joint.sum(axis=1)
    if np.any(s <= 0):
        i = int(np.flatnonzero(s <= 0)[0])
        raise DegeneratePosteriorError(d[i], w[i])
    density = s if scale is None else scale * s
    return joint / s[:, None], None, density


def posterior_modern(phi, theta_d, w, d=-1) -> np.ndarray:
    """Topic responsibilities for term ``w`` in a document with mixture ``theta_d``.

    ``d`` only labels the error raised when every topic the document uses
    gives the term zero probability.
    """
    phi = np.asarray(phi, dtype=np.float64)
    joint = phi[:, w] * np.asarray(theta_d, dtype=np.float64)
    s = joint.sum()
    if not s > 0:
        raise DegeneratePosteriorError(d, w)
    return joint / s


def posterior_f1(m: ModelF1, d, w) -> np.ndarray:
    # P(d) cancels between numerator and denominator.
    return posterior_modern(m.phi, m.theta[d], w, d)


def posterior_f2(m: ModelF2, d, w) -> np.ndarray:
    post, _, _ = _posteriors(m, np.array([d]), np.array([w]))
    return post[0]


def posterior_bg(m: BackgroundMixture, d, w):
    """Return ``(bg_post, topic_post)`` for entry (d, w)."""
    post, bg, _ = _posteriors(m, np.array([d]), np.array([w]))
    return float(bg[0]), post[0]


def e_step(corpus: Corpus, model: Model) -> Responsibilities:
    """Materialize posteriors for every corpus entry (diagnostics only)."""
    _check_dims(corpus, model)
    post, bg, _ = _posteriors(model, corpus.doc_ids, corpus.term_ids)
    return Responsibilities(post, bg)


# -- likelihoods -----------------------------------------------------------

def _check_dims(corpus, model):
    if model.V != corpus.n_terms:
        raise ValidationError(f"model has V={model.V}, corpus has V={corpus.n_terms}")
    if model.D != corpus.n_docs:
        raise ValidationError(f"model has D={model.D}, corpus has D={corpus.n_docs}")


def _batches(corpus, batch_size):
    for start in range(0, corpus.nnz, batch_size):
        sl = slice(start, start + batch_size)
        yield corpus.doc_ids[sl], corpus.term_ids[sl], corpus.counts[sl]


def _densities(model, d, w):
    if isinstance(model, BackgroundMixture):
        if model.p_w_bg is None:
            raise ValidationError("background unigram not set")
        joint, scale = _topic_terms(model.base, d, w)
        s = joint.sum(axis=1)
        topic = s if scale is None else scale * s
        return model.lambda_b * model.p_w_bg[w] + (1.0 - model.lambda_b) * topic
    joint, scale = _topic_terms(model, d, w)
    s = joint.sum(axis=1)
    return s if scale is None else scale * s


def log_likelihood(corpus: Corpus, model: Model, batch_size=DEFAULT_BATCH) -> float:
    """sum_{d,w} n(d,w) log P(d,w) under the model's own formulation.

    The modern view uses sum_z phi theta; F1 multiplies by P(d); F2 uses
    sum_z P(w|z)P(d|z)P(z); background models add lambda_b P(w|theta_B).
    A zero density raises :class:`ZeroDensityError`.
    """
    _check_dims(corpus, model)
    total = 0.0
    for d, w, n in _batches(corpus, batch_size):
        dens = _densities(model, d, w)
        bad = dens <= 0
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ZeroDensityError(d[i], w[i])
        total += float(np.dot(n, np.log(dens)))
    return total


def mixture_log_likelihood(corpus: Corpus, phi, theta, lambda_b=0.0, p_w_bg=None) -> float:
    """Log-likelihood without any document prior.

    Density per entry is ``lambda_b * p_w_bg[w] + (1 - lambda_b) * sum_z phi[z,w] theta[d,z]``;
    with ``lambda_b = 0`` this is the token-level likelihood.
    """
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    d, w, n = corpus.doc_ids, corpus.term_ids, corpus.counts
    dens = (phi[:, w].T * theta[d]).sum(axis=1)
    if lambda_b:
        dens = lambda_b * np.asarray(p_w_bg)[w] + (1.0 - lambda_b) * dens
    bad = dens <= 0
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ZeroDensityError(d[i], w[i])
    return float(np.dot(n, np.log(dens)))


# -- M-step ----------------------------------------------------------------

class _Accumulator:
    def __init__(self, D, V, T):
        self.word = np.zeros((T, V))
        self.doc = np.zeros((D, T))
        self.doc_mass = np.zeros(D)
        self.D, self.V, self.T = D, V, T

    def add(self, d, w, n, topic_post, bg_post=None):
        if bg_post is None:
            weights = n[:, None] * topic_post
        else:
            keep = 1.0 - bg_post
            weights = n[:, None] * (keep[:, None] * topic_post)
            self.doc_mass += np.bincount(d, weights=n * keep, minlength=self.D)
        for k in range(self.T):
            self.word[k] += np.bincount(w, weights=weights[:, k], minlength=self.V)
            self.doc[:, k] += np.bincount(d, weights=weights[:, k], minlength=self.D)


def _normalize_topics(acc, reseat):
    tot = acc.word.sum(axis=1)
    dead = np.flatnonzero(tot <= 0)
    if dead.size and not reseat:
        raise DeadTopicError(dead[0])
    phi = np.empty_like(acc.word)
    alive = tot > 0
    phi[alive] = acc.word[alive] / tot[alive, None]
    if dead.size:
        log.warning("reseating dead topics %s to the uniform distribution", dead.tolist())
        phi[~alive] = 1.0 / acc.V
    return phi, tot, alive


def _finalize(corpus, model, acc, reseat):
    phi, topic_tot, alive = _normalize_topics(acc, reseat)
    total = float(corpus_total_tokens(corpus))

    if isinstance(model, BackgroundMixture):
        # Normalizers use sum_w n(d,w)(1 - bg) in place of the equal
        # sum_z sum_w n(d,w)(1 - bg)P(z|.), since topic posteriors sum to 1.
        # With lambda_b = 0 they are the integer token counts, so updates
        # coincide bit for bit with the plain formulations.
        base = model.base
        mass = acc.doc_mass
        if isinstance(base, ModelF1):
            theta = np.array(base.theta)
            ok = mass > 0
            theta[ok] = acc.doc[ok] / mass[ok, None]
            new_base = ModelF1(phi, theta, mass / mass.sum())
        else:
            p_z = topic_tot / topic_tot.sum()
            p_d_given_z = _p_d_given_z(acc, alive)
            new_base = ModelF2(phi, p_z, p_d_given_z)
        return BackgroundMixture(new_base, model.lambda_b, model.p_w_bg)

    if isinstance(model, ModelF1):
        theta = acc.doc / corpus.doc_totals[:, None]
        if model.modern:
            return ModelF1(phi, theta, model.p_d, modern=True)
        return ModelF1(phi, theta, corpus.doc_totals / total)

    # sum_z of the numerators equals the token total; dividing by it keeps
    # every entry <= 1 under rounding.
    p_z = topic_tot / topic_tot.sum()
    return ModelF2(phi, p_z, _p_d_given_z(acc, alive))


def _p_d_given_z(acc, alive):
    col = acc.doc.sum(axis=0)
    out = np.full((acc.T, acc.D), 1.0 / acc.D)
    out[alive] = (acc.doc[:, alive] / col[alive]).T
    return out


def m_step(corpus: Corpus, model: Model, resp: Responsibilities, reseat_dead_topics=False) -> Model:
    """Closed-form parameter update from fixed responsibilities.

    ``model`` supplies the formulation and the parameters the update keeps
    (lambda_b, the background unigram, the modern view's P(d)).
    """
    _check_dims(corpus, model)
    if resp.topic_post.shape != (corpus.nnz, model.T):
        raise ValidationError("responsibilities do not match the corpus entries")
    if isinstance(model, BackgroundMixture) != (resp.bg_post is not None):
        raise ValidationError("bg_post must be present exactly for background models")
    acc = _Accumulator(corpus.n_docs, corpus.n_terms, model.T)
    acc.add(corpus.doc_ids, corpus.term_ids, corpus.counts, resp.topic_post, resp.bg_post)
    return _finalize(corpus, model, acc, reseat_dead_topics)


def em_iteration(corpus: Corpus, model: Model, reseat_dead_topics=False, batch_size=DEFAULT_BATCH):
    """One fused E/M sweep.

    All responsibilities are computed from the input model before any
    parameter changes.  Returns ``(new_model, loglik_of_input_model)``.
    """
    _check_dims(corpus, model)
    acc = _Accumulator(corpus.n_docs, corpus.n_terms, model.T)
    loglik = 0.0
    for d, w, n in _batches(corpus, batch_size):
        post, bg, dens = _posteriors(model, d, w)
        loglik += float(np.dot(n, np.log(dens)))
        acc.add(d, w, n, post, bg)
    return _finalize(corpus, model, acc, reseat_dead_topics), loglik


def em_iteration_modern(corpus: Corpus, phi, theta, **kw):
    """Token-level EM step on raw arrays; returns ``(phi', theta', loglik_before)``."""
    m = ModelF1(phi, theta, np.full(np.shape(theta)[0], 1.0 / np.shape(theta)[0]), modern=True)
    new, ll = em_iteration(corpus, m, **kw)
    return new.phi, new.theta, ll


def em_iteration_f1(corpus: Corpus, m: ModelF1, **kw):
    if not isinstance(m, ModelF1) or m.modern:
        raise ValidationError("em_iteration_f1 expects a Formulation 1 model")
    return em_iteration(corpus, m, **kw)


def em_iteration_f2(corpus: Corpus, m: ModelF2, **kw):
    if not isinstance(m, ModelF2):
        raise ValidationError("em_iteration_f2 expects a Formulation 2 model")
    return em_iteration(corpus, m, **kw)


def em_iteration_bg(corpus: Corpus, m: BackgroundMixture, **kw):
    if not isinstance(m, BackgroundMixture):
        raise ValidationError("em_iteration_bg expects a BackgroundMixture")
    return em_iteration(corpus, m, **kw)


def background_unigram(corpus: Corpus) -> np.ndarray:
    """Corpus-wide term frequencies, P(w|theta_B) = sum_d n(d,w) / sum_{d,w} n(d,w)."""
    counts = np.zeros(corpus.n_terms, dtype=np.int64)
    np.add.at(counts, corpus.term_ids, corpus.counts)
    return counts / corpus_total_tokens(corpus)


# -- training --------------------------------------------------------------

def initial_model(corpus: Corpus, config: TrainConfig) -> Model:
    m = init_random(corpus.n_docs, corpus.n_terms, config.n_topics, config.seed,
                    config.formulation, config.lambda_b)
    if isinstance(m, BackgroundMixture):
        m = m.with_background(background_unigram(corpus))
    return m


def train(corpus: Corpus, config: TrainConfig, init: Optional[Model] = None):
    """Run EM until the relative likelihood change drops below ``rel_tol``.

    The trace holds the likelihood of the model entering each iteration
    plus one final evaluation of the returned model.
    """
    model = init if init is not None else initial_model(corpus, config)
    trace = TrainTrace()
    start = time.perf_counter()
    prev = None
    for it in range(config.max_iters):
        try:
            new, ll = em_iteration(corpus, model, config.reseat_dead_topics, config.batch_size)
        except PLSAError as e:
            e.iteration = it
            e.args = (f"iteration {it}: {e}",) + e.args[1:]
            raise
        trace.append(it, ll, time.perf_counter() - start)
        log.debug("iteration %d loglik %.10g", it, ll)
        model = new
        if prev is not None and abs(ll - prev) <= config.rel_tol * abs(prev):
            break
        prev = ll
    final = log_likelihood(corpus, model, config.batch_size)
    trace.append(len(trace), final, time.perf_counter() - start)
    if not trace.is_monotone():
        log.warning("log-likelihood decreased during training")
    return model, trace


# -- fold-in ---------------------------------------------------------------

def _doc_arrays(new_doc_counts, V):
    if isinstance(new_doc_counts, Mapping):
        items = list(new_doc_counts.items())
    else:
        items = list(new_doc_counts)
    if not items:
        raise ValidationError("fold-in document is empty")
    merged = {}
    for w, c in items:
        w, c = int(w), int(c)
        if not 0 <= w < V:
            raise ValidationError(f"term id {w} outside vocabulary of size {V}")
        if c < 1:
            raise ValidationError(f"count for term {w} must be >= 1, got {c}")
        merged[w] = merged.get(w, 0) + c
    w = np.array(sorted(merged), dtype=np.int64)
    return w, np.array([merged[i] for i in w.tolist()], dtype=np.int64)


def fold_in(phi, new_doc_counts: Union[Mapping, Iterable], iters: int, seed: int = 0,
            lambda_b: float = 0.0, p_w_bg=None, theta0=None) -> np.ndarray:
    """Infer P(z|d) for an unseen document with the topics held fixed.

    ``new_doc_counts`` maps term id -> count (or is an iterable of pairs).
    Each iteration runs the topic E-step and the theta M-step of the
    token-level model.  A background component, if given, discounts the
    topic responsibilities by ``1 - P(background|w)``.  ``theta0``
    overrides the seeded interior starting point.
    """
    phi = np.asarray(phi, dtype=np.float64)
    T, V = phi.shape
    w, n = _doc_arrays(new_doc_counts, V)
    if theta0 is None:
        theta = _random_rows(np.random.default_rng(seed), (T,), INIT_EPS)
    else:
        theta = np.array(theta0, dtype=np.float64)
    cols = phi[:, w].T
    for _ in range(int(iters)):
        joint = cols * theta
        s = joint.sum(axis=1)
        if lambda_b:
            dens = lambda_b * np.asarray(p_w_bg)[w] + (1.0 - lambda_b) * s
            if np.any(dens <= 0):
                raise ZeroDensityError(-1, w[np.flatnonzero(dens <= 0)[0]])
            keep = 1.0 - lambda_b * np.asarray(p_w_bg)[w] / dens
            post = np.zeros_like(joint)
            ok = s > 0
            post[ok] = joint[ok] / s[ok, None]
            acc = (n * keep) @ post
            theta = acc / acc.sum()
        else:
            if np.any(s <= 0):
                raise DegeneratePosteriorError(-1, w[np.flatnonzero(s <= 0)[0]])
            theta = (n @ (joint / s[:, None])) / n.sum()
    return theta


def fold_in_log_likelihood(phi, new_doc_counts, theta, lambda_b=0.0, p_w_bg=None) -> float:
    phi = np.asarray(phi, dtype=np.float64)
    w, n = _doc_arrays(new_doc_counts, phi.shape[1])
    dens = phi[:, w].T @ np.asarray(theta)
    if lambda_b:
        dens = lambda_b * np.asarray(p_w_bg)[w] + (1.0 - lambda_b) * dens
    if np.any(dens <= 0):
        raise ZeroDensityError(-1, w[np.flatnonzero(dens <= 0)[0]])
    return float(n @ np.log(dens))


def fold_in_corpus(phi, corpus: Corpus, iters: int, seed: int = 0, lambda_b=0.0, p_w_bg=None) -> np.ndarray:
    """Fold in every document of ``corpus``; document i uses seed ``seed + i``."""
    phi = np.asarray(phi)
    if corpus.n_terms != phi.shape[1]:
        raise ValidationError(f"corpus has V={corpus.n_terms}, model has V={phi.shape[1]}")
    bounds = np.searchsorted(corpus.doc_ids, np.arange(corpus.n_docs + 1))
    theta = np.empty((corpus.n_docs, phi.shape[0]))
    for d in range(corpus.n_docs):
        sl = slice(bounds[d], bounds[d + 1])
        pairs = zip(corpus.term_ids[sl].tolist(), corpus.counts[sl].tolist())
        theta[d] = fold_in(phi, pairs, iters, seed + d, lambda_b, p_w_bg)
    return theta


def doc_topic_view(model: Model):
    """(phi, theta) of the topic branch, converting F2 parameters to P(z|d)."""
    base = model.base if isinstance(model, BackgroundMixture) else model
    if isinstance(base, ModelF2):
        base = f2_to_f1(base)
    return base.phi, base.theta


__all__ = [
    "Responsibilities", "TrainConfig", "TrainTrace", "TraceRecord",
    "posterior_modern", "posterior_f1", "posterior_f2", "posterior_bg", "e_step",
    "m_step", "em_iteration", "em_iteration_modern", "em_iteration_f1", "em_iteration_f2",
    "em_iteration_bg", "background_unigram", "log_likelihood", "mixture_log_likelihood",
    "initial_model", "train", "fold_in", "fold_in_log_likelihood", "fold_in_corpus",
    "doc_topic_view", "UPDATE_TOL",
]
