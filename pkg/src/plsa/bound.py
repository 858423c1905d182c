"""Evidence lower bound diagnostics for the token-level model.

For any per-entry distribution q over topics,

    loglik = elbo(q) + sum_{d,w} n(d,w) KL(q_{d,w} || P(z|w,d)),

so the bound is tight exactly when q is the E-step posterior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .em import Responsibilities
from .errors import DegeneratePosteriorError, InfiniteKLError, ValidationError
from .model import check_stochastic


@dataclass(frozen=True)
class BoundReport:
    loglik: float
    elbo: float
    kl: float

    @property
    def gap(self) -> float:
        """loglik - (elbo + kl); zero up to rounding."""
        return self.loglik - (self.elbo + self.kl)


def _xlogy_ratio(q, num, den):
    """sum over topics of q * log(num / den) with 0 log 0 = 0."""
    out = np.zeros_like(q)
    pos = q > 0
    out[pos] = q[pos] * (np.log(num[pos]) - np.log(den[pos]))
    return out.sum(axis=1)


def bound_report(corpus: Corpus, phi, theta, q) -> BoundReport:
    """Log-likelihood, Jensen bound and KL gap for auxiliary posteriors ``q``.

    ``q`` is a Responsibilities object or an (nnz, T) array aligned with the
    corpus entries.  Raises InfiniteKLError if q puts mass on a topic whose
    joint term phi[z,w] theta[d,z] is zero.
    """
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    q = np.asarray(q.topic_post if isinstance(q, Responsibilities) else q, dtype=np.float64)
    d, w, n = corpus.doc_ids, corpus.term_ids, corpus.counts
    if q.shape != (corpus.nnz, phi.shape[0]):
        raise ValidationError(f"q has shape {q.shape}, expected {(corpus.nnz, phi.shape[0])}")
    check_stochastic(q, "q", 1e-9)

    joint = phi[:, w].T * theta[d]
    s = joint.sum(axis=1)
    if np.any(s <= 0):
        i = int(np.flatnonzero(s <= 0)[0])
        raise DegeneratePosteriorError(d[i], w[i])
    outside = (q > 0) & (joint <= 0)
    if np.any(outside):
        i = int(np.flatnonzero(outside.any(axis=1))[0])
        raise InfiniteKLError(d[i], w[i])
    post = joint / s[:, None]

    loglik = float(np.dot(n, np.log(s)))
    elbo = float(np.dot(n, _xlogy_ratio(q, joint, q)))
    kl = float(np.dot(n, _xlogy_ratio(q, q, post)))
    return BoundReport(loglik, elbo, kl)
