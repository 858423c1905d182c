"""Sample corpora from known topic parameters.

Each token position draws a topic from theta_d, then a term from that
topic's row of phi.  Categorical draws use the inverse CDF over the stored
row order, consuming one uniform per draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import ValidationError
from .model import UPDATE_TOL, check_stochastic


@dataclass(frozen=True, eq=False)
class PlantedModel:
    phi: np.ndarray
    theta: np.ndarray
    doc_lengths: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.float64)
        theta = np.array(self.theta, dtype=np.float64)
        lengths = np.array(self.doc_lengths)
        if phi.ndim != 2 or theta.ndim != 2 or lengths.ndim != 1:
            raise ValidationError("phi and theta must be 2-D, doc_lengths 1-D")
        if theta.shape[1] != phi.shape[0]:
            raise ValidationError(f"theta has {theta.shape[1]} topics, phi has {phi.shape[0]}")
        if lengths.shape[0] != theta.shape[0]:
            raise ValidationError(f"{lengths.shape[0]} document lengths for {theta.shape[0]} documents")
        if not np.all(lengths == np.round(lengths)) or np.any(lengths < 1):
            raise ValidationError("document lengths must be integers >= 1")
        check_stochastic(phi, "phi", UPDATE_TOL)
        check_stochastic(theta, "theta", UPDATE_TOL)
        for name, a in (("phi", phi), ("theta", theta), ("doc_lengths", lengths.astype(np.int64))):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    T = property(lambda self: self.phi.shape[0])
    V = property(lambda self: self.phi.shape[1])
    D = property(lambda self: self.theta.shape[0])


def _cdf(p):
    c = np.cumsum(p, axis=-1)
    # Force the last step to 1 so u in [0, 1) always lands on a category.
    c /= c[..., -1:]
    c[..., -1] = 1.0
    return c


def sample_corpus(planted: PlantedModel, seed: int) -> Corpus:
    rng = np.random.default_rng(seed)
    theta_cdf = _cdf(planted.theta)
    phi_cdf = _cdf(planted.phi)
    V = planted.V
    docs, terms, counts = [], [], []
    for d, n_d in enumerate(planted.doc_lengths.tolist()):
        z = np.searchsorted(theta_cdf[d], rng.random(n_d), side="right")
        u = rng.random(n_d)
        w = np.empty(n_d, dtype=np.int64)
        for k in np.unique(z):
            mask = z == k
            w[mask] = np.searchsorted(phi_cdf[k], u[mask], side="right")
        c = np.bincount(w, minlength=V)
        nz = np.flatnonzero(c)
        docs.append(np.full(len(nz), d))
        terms.append(nz)
        counts.append(c[nz])
    return Corpus(planted.D, V, np.concatenate(docs), np.concatenate(terms), np.concatenate(counts))
