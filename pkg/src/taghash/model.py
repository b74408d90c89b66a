"""Model state, streaming sufficient statistics, and objective evaluators.

All history-dependent quantities are folded into fixed-size accumulators at
the end of each round, so memory and per-round cost never depend on how much
data has already been seen.  The reweighting diagonal of old data is frozen
into D1/D2 at commit time; it is never refreshed afterwards.
"""
from dataclasses import dataclass, field

import numpy as np

from .kernel import AnchorSet


class StateError(RuntimeError):
    """Illegal lifecycle transition (e.g. committing the same round twice)."""


@dataclass
class Hyperparams:
    """Trade-off weights and loop counts.

    Defaults follow the reference operating point: alpha=300, beta=0.1,
    theta=0.1, mu=10, 7 outer iterations, 3 code-descent sweeps.
    """

    r: int                      # code length (bits)
    m: int                      # anchor count
    f: int                      # embedding dimension
    c: int                      # tag vocabulary size
    alpha: float = 300.0
    beta: float = 0.1
    theta: float = 0.1
    mu: float = 10.0
    iters: int = 7              # outer iterations per round
    dcc_sweeps: int = 3         # full bit sweeps per code update
    epsilon_norm: float = 1e-6  # floor for residual row norms in reweighting
    tag_regression: bool = True  # False drops the tag-regression term entirely

    def __post_init__(self):
        if self.r < 1 or self.iters < 1 or self.dcc_sweeps < 1:
            raise ValueError("r, iters and dcc_sweeps must all be >= 1")
        if self.epsilon_norm <= 0:
            raise ValueError("epsilon_norm must be positive")
        for name in ("alpha", "beta", "theta", "mu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class FeatureChunk:
    """One round's raw features plus their kernelized form."""

    x: np.ndarray                # (n, d) raw
    phi: np.ndarray              # (n, m) kernelized

    @property
    def n(self):
        return self.x.shape[0]


@dataclass
class TagChunk:
    """Binary tag incidence for one round."""

    y: np.ndarray                # (n, c) in {0, 1}


@dataclass
class RoundData:
    """Everything the optimizer needs for one round, already preprocessed."""

    phi: np.ndarray              # (n, m)
    y: np.ndarray                # (n, c)
    z: np.ndarray                # (n, f)

    @property
    def n(self):
        return self.phi.shape[0]


@dataclass
class ModelState:
    w: np.ndarray                # (r, c) codes -> tags
    u: np.ndarray                # (r, m) codes -> kernel features
    v: np.ndarray                # (r, f) codes -> semantics
    p: np.ndarray                # (m, r) hash projection (the public function)
    anchors: AnchorSet
    hyper: Hyperparams
    round_index: int = 0         # rounds committed so far
    total_seen: int = 0

    @classmethod
    def fresh(cls, anchors, hyper):
        r, m, f, c = hyper.r, hyper.m, hyper.f, hyper.c
        return cls(
            w=np.zeros((r, c)), u=np.zeros((r, m)),
            v=np.zeros((r, f)), p=np.zeros((m, r)),
            anchors=anchors, hyper=hyper)

    def check_finite(self):
        for name in ("w", "u", "v", "p"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise FloatingPointError(f"non-finite entries in {name}")


@dataclass
class AccumStats:
    """Streaming sufficient statistics over all committed chunks.

    c1 = sum B'B        (r, r)     c2 = sum B'phi      (r, m)
    c3 = sum phi'phi    (m, m)     c4 = sum phi'B      (m, r)
    c5 = sum B'Z        (r, f)
    d1 = sum B'KB       (r, r)     d2 = sum B'KY       (r, c)
    sy_weighted = sum_i K_ii ||Y_i||^2 and sz = sum ||Z||_F^2 are the scalar
    constants needed to evaluate the historical objective terms exactly.
    """

    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray
    c4: np.ndarray
    c5: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    sy_weighted: float = 0.0
    sz: float = 0.0
    rounds_committed: int = 0
    total_rows: int = 0

    @classmethod
    def zeros(cls, hyper):
        r, m, f, c = hyper.r, hyper.m, hyper.f, hyper.c
        return cls(
            c1=np.zeros((r, r)), c2=np.zeros((r, m)),
            c3=np.zeros((m, m)), c4=np.zeros((m, r)),
            c5=np.zeros((r, f)), d1=np.zeros((r, r)), d2=np.zeros((r, c)))


def commit_round(state, stats, chunk, b_new, weights):
    """Fold one finished round into the streaming statistics.

    After this the chunk's raw matrices may be discarded; only its codes
    are kept (by the caller) for retrieval.
    """
    if stats.rounds_committed != state.round_index:
        raise StateError(
            f"round {state.round_index} already committed "
            f"({stats.rounds_committed} rounds in stats)")
    b = np.asarray(b_new, dtype=np.float64)
    phi, y, z = chunk.phi, chunk.y, chunk.z
    k = np.asarray(weights, dtype=np.float64)
    if np.any(k <= 0):
        raise ValueError("reweighting entries must be strictly positive")

    stats.c1 += b.T @ b
    stats.c2 += b.T @ phi
    stats.c3 += phi.T @ phi
    stats.c4 += phi.T @ b
    stats.c5 += b.T @ z
    bk = b * k[:, None]
    stats.d1 += bk.T @ b
    stats.d2 += bk.T @ y
    stats.sy_weighted += float(np.sum(k * np.sum(y * y, axis=1)))
    stats.sz += float(np.sum(z * z))
    stats.rounds_committed += 1
    stats.total_rows += b.shape[0]

    state.round_index += 1
    state.total_seen += b.shape[0]
    state.check_finite()
    # the transpose pairing must survive every commit
    assert np.allclose(stats.c4, stats.c2.T, rtol=1e-12, atol=1e-12)
    return stats


def objective_value(state, stats, chunk, b_new, weights):
    """Surrogate objective with frozen reweighting diagonals.

    Current-chunk tag term uses the supplied weights; historical terms are
    rebuilt exactly from the accumulators.  This is the quantity each
    optimization step descends; the true row-norm objective is reported
    separately by true_tag_objective.
    """
    h = state.hyper
    b = np.asarray(b_new, dtype=np.float64)
    phi, y, z = chunk.phi, chunk.y, chunk.z
    k = np.asarray(weights, dtype=np.float64)
    for a in (b, phi, y, z, k):
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("non-finite input to objective")
    w, u, v, p = state.w, state.u, state.v, state.p

    total = 0.0
    if h.tag_regression:
        res = y - b @ w
        total += float(np.sum(k * np.sum(res * res, axis=1)))
        total += stats.sy_weighted - 2.0 * float(np.sum(w * stats.d2)) \
            + float(np.sum(w * (stats.d1 @ w)))
    if h.beta > 0:
        res = phi - b @ u
        hist = float(np.trace(stats.c3)) - 2.0 * float(np.sum(u * stats.c2)) \
            + float(np.sum(u * (stats.c1 @ u)))
        total += h.beta * (float(np.sum(res * res)) + hist)
    if h.theta > 0:
        res = z - b @ v
        hist = stats.sz - 2.0 * float(np.sum(v * stats.c5)) \
            + float(np.sum(v * (stats.c1 @ v)))
        total += h.theta * (float(np.sum(res * res)) + hist)
    if h.mu > 0:
        res = b - phi @ p
        hist = float(stats.total_rows * h.r) \
            - 2.0 * float(np.sum(p * stats.c4)) \
            + float(np.sum(p * (stats.c3 @ p)))
        total += h.mu * (float(np.sum(res * res)) + hist)
    total += h.alpha * sum(
        float(np.sum(a * a)) for a in (w, u, v, p))
    return total


def true_tag_objective(state, stats, chunk, b_new):
    """Row-norm tag objective used for descent monitoring.

    sum_i ||(Y - BW)_i||_2 over the current chunk, plus half of the frozen
    historical quadratic and half the ridge term.  The halves make this the
    exact quantity the reweight/solve alternation provably never increases.
    """
    h = state.hyper
    w = state.w
    res = chunk.y - np.asarray(b_new, float) @ w
    l21 = float(np.sum(np.sqrt(np.sum(res * res, axis=1))))
    hist = stats.sy_weighted - 2.0 * float(np.sum(w * stats.d2)) \
        + float(np.sum(w * (stats.d1 @ w)))
    return l21 + 0.5 * hist + 0.5 * h.alpha * float(np.sum(w * w))
