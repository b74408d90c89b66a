import numpy as np
import pytest

from taghash.kernel import AnchorSet
from taghash.model import (AccumStats, Hyperparams, ModelState, RoundData,
                           commit_round)


def random_round_data(rng, n, m, c, f):
    return RoundData(
        phi=rng.uniform(0.0, 1.0, size=(n, m)),
        y=(rng.random((n, c)) < 0.4).astype(float),
        z=rng.normal(size=(n, f)))


def random_codes(rng, n, r):
    return rng.integers(0, 2, size=(n, r)).astype(float) * 2.0 - 1.0


def make_state(hyper, rng=None):
    rng = rng or np.random.default_rng(0)
    anchors = AnchorSet(rng.normal(size=(hyper.m, 4)), kernel_width=1.0)
    state = ModelState.fresh(anchors, hyper)
    return state


def committed_history(rng, hyper, n_chunks, n):
    """Commit n_chunks random rounds; returns everything the oracles need."""
    state = make_state(hyper, rng)
    stats = AccumStats.zeros(hyper)
    chunks, codes, weights = [], [], []
    for _ in range(n_chunks):
        chunk = random_round_data(rng, n, hyper.m, hyper.c, hyper.f)
        b = random_codes(rng, n, hyper.r)
        k = rng.uniform(0.2, 2.0, size=n)
        commit_round(state, stats, chunk, b, k)
        chunks.append(chunk)
        codes.append(b)
        weights.append(k)
    return state, stats, chunks, codes, weights


@pytest.fixture
def small_hyper():
    return Hyperparams(r=4, m=6, f=3, c=5, alpha=2.0, beta=0.5, theta=0.7,
                       mu=1.3, iters=3, dcc_sweeps=2)
