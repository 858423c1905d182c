import numpy as np
import pytest

import oracles
from conftest import random_corpus, random_stochastic
from plsa.bound import bound_report
from plsa.corpus import Corpus
from plsa.em import e_step
from plsa.errors import InfiniteKLError, ValidationError
from plsa.model import ModelF1


def instance(rng, D=4, V=5, T=3):
    N = random_corpus(rng, D, V)
    corpus = Corpus.from_dense(N)
    phi = random_stochastic(rng, (T, V))
    theta = random_stochastic(rng, (D, T))
    return N, corpus, phi, theta


def test_exact_posterior_closes_gap(rng):
    _, corpus, phi, theta = instance(rng)
    q = e_step(corpus, ModelF1(phi, theta, np.full(4, 0.25), modern=True))
    rep = bound_report(corpus, phi, theta, q)
    assert abs(rep.kl) < 1e-12
    assert rep.elbo == pytest.approx(rep.loglik, abs=1e-9)


def test_uniform_q_is_a_lower_bound(rng):
    _, corpus, phi, theta = instance(rng)
    rep = bound_report(corpus, phi, theta, np.full((corpus.nnz, 3), 1 / 3))
    assert rep.elbo <= rep.loglik
    assert rep.kl > 0


def test_gap_matches_independent_kl(rng):
    for _ in range(10):
        N, corpus, phi, theta = instance(rng)
        q = random_stochastic(rng, (corpus.nnz, 3))
        rep = bound_report(corpus, phi, theta, q)
        kl = oracles.kl_total(N.tolist(), phi.tolist(), theta.tolist(), q.tolist())
        assert rep.loglik - rep.elbo == pytest.approx(kl, abs=1e-9)
        assert abs(rep.gap) < 1e-9


def test_zero_entries_in_q(rng):
    _, corpus, phi, theta = instance(rng)
    q = np.zeros((corpus.nnz, 3))
    q[:, 1] = 1.0
    rep = bound_report(corpus, phi, theta, q)
    assert np.isfinite(rep.elbo) and rep.kl >= -1e-12


def test_infinite_kl():
    corpus = Corpus.from_entries(1, 2, [(0, 0, 1)])
    phi = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(InfiniteKLError):
        bound_report(corpus, phi, [[0.5, 0.5]], [[0.5, 0.5]])


def test_q_must_be_stochastic(rng):
    _, corpus, phi, theta = instance(rng)
    with pytest.raises(ValidationError):
        bound_report(corpus, phi, theta, np.full((corpus.nnz, 3), 0.3))


def test_posterior_maximizes_elbo(rng):
    _, corpus, phi, theta = instance(rng, 3, 4, 2)
    best = bound_report(corpus, phi, theta, e_step(corpus, ModelF1(phi, theta, np.full(3, 1 / 3), modern=True)))
    for _ in range(200):
        q = random_stochastic(rng, (corpus.nnz, 2), low=0.0)
        assert bound_report(corpus, phi, theta, q).elbo <= best.elbo + 1e-9
