"""One round of alternating optimization.

Five steps per outer iteration: closed-form ridge solves for the four
projection matrices, then cyclic bit-by-bit descent on the chunk's binary
codes.  Every solve combines the committed streaming statistics with the
current chunk's live contribution recomputed from the evolving codes; the
contribution is frozen into the accumulators only at commit time.
"""
import numpy as np
import scipy.linalg

from .codes import CodeBlock
from .model import commit_round, objective_value


class RoundAborted(RuntimeError):
    """Objective went non-finite; model state was rolled back."""


def _ridge_solve(a, rhs):
    # a is symmetric and, with a positive ridge, positive definite; fall back
    # to least squares when the ridge is ablated away (alpha = 0)
    try:
        c, low = scipy.linalg.cho_factor(a, check_finite=False)
        return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(a, rhs, rcond=None)[0]


def init_round(chunk, state, seed):
    """Draw random codes for the chunk and the initial reweighting diagonal.

    The tag projection is warm-started from the previous round; at round 1
    it is drawn Gaussian with standard deviation 0.01.
    """
    h = state.hyper
    rng = np.random.default_rng(seed)
    b = rng.integers(0, 2, size=(chunk.n, h.r)).astype(np.float64) * 2.0 - 1.0
    if state.round_index == 0:
        state.w = rng.normal(0.0, 0.01, size=(h.r, h.c))
    weights = compute_reweights(chunk.y, b, state.w, h.epsilon_norm)
    return b, weights


def update_u(stats, chunk, b, hyper):
    """Ridge solve for the codes -> kernel-features projection."""
    a = stats.c1 + b.T @ b + (hyper.alpha / hyper.beta) * np.eye(hyper.r)
    return _ridge_solve(a, stats.c2 + b.T @ chunk.phi)


def update_p(stats, chunk, b, hyper):
    """Ridge solve for the hash projection."""
    a = stats.c3 + chunk.phi.T @ chunk.phi \
        + (hyper.alpha / hyper.mu) * np.eye(hyper.m)
    return _ridge_solve(a, stats.c4 + chunk.phi.T @ b)


def update_v(stats, chunk, b, hyper):
    """Ridge solve for the codes -> semantics projection."""
    a = stats.c1 + b.T @ b + (hyper.alpha / hyper.theta) * np.eye(hyper.r)
    return _ridge_solve(a, stats.c5 + b.T @ chunk.z)


def compute_reweights(y, b, w, epsilon_norm):
    """Per-row weights 1 / max(||residual row||, floor) for the tag term."""
    res = np.asarray(y, float) - np.asarray(b, float) @ w
    norms = np.sqrt(np.sum(res * res, axis=1))
    return 1.0 / np.maximum(norms, epsilon_norm)


def update_w(stats, chunk, b, weights, hyper):
    """Reweighted ridge solve for the codes -> tags projection.

    Historical rows enter through the frozen accumulators; current-chunk
    rows through the supplied weights.
    """
    bk = b * weights[:, None]
    a = stats.d1 + bk.T @ b + hyper.alpha * np.eye(hyper.r)
    return _ridge_solve(a, stats.d2 + bk.T @ chunk.y)


def assemble_q(chunk, state, weights):
    """Linear-term matrix of the code subproblem for the current chunk."""
    h = state.hyper
    q = np.zeros((chunk.n, h.r))
    if h.tag_regression:
        q += weights[:, None] * (chunk.y @ state.w.T)
    if h.beta > 0:
        q += h.beta * (chunk.phi @ state.u.T)
    if h.theta > 0:
        q += h.theta * (chunk.z @ state.v.T)
    if h.mu > 0:
        q += h.mu * (chunk.phi @ state.p)
    return q


def code_subproblem_value(b, q, state, weights):
    """Objective of the code step (up to B-independent constants)."""
    h = state.hyper
    b = np.asarray(b, float)
    val = -2.0 * float(np.sum(b * q))
    if h.beta > 0:
        bu = b @ state.u
        val += h.beta * float(np.sum(bu * bu))
    if h.theta > 0:
        bv = b @ state.v
        val += h.theta * float(np.sum(bv * bv))
    if h.tag_regression:
        bw = b @ state.w
        val += float(np.sum(weights * np.sum(bw * bw, axis=1)))
    return val


def dcc_bit_column(q, b, l, state, weights):
    """Optimal value of bit column l with all other bits held fixed.

    Sign of the bit's linear coefficient; sign(0) resolves to +1.
    """
    h = state.hyper
    t = q[:, l].copy()
    # exclusion products: full product minus the bit's own column
    if h.tag_regression:
        ww = state.w @ state.w[l]              # (r,)
        t -= weights * (b @ ww - b[:, l] * ww[l])
    if h.beta > 0:
        uu = state.u @ state.u[l]
        t -= h.beta * (b @ uu - b[:, l] * uu[l])
    if h.theta > 0:
        vv = state.v @ state.v[l]
        t -= h.theta * (b @ vv - b[:, l] * vv[l])
    return np.where(t >= 0.0, 1.0, -1.0)


def update_b_dcc(q, b, state, weights):
    """Cyclic bit-wise descent on the chunk's codes.

    Each bit column is set to its single-bit optimum given the others;
    runs the configured number of full sweeps.
    """
    b = np.asarray(b, float).copy()
    for _ in range(state.hyper.dcc_sweeps):
        for l in range(state.hyper.r):
            b[:, l] = dcc_bit_column(q, b, l, state, weights)
    return b


def run_round(state, stats, chunk, seed):
    """Execute one full round on a preprocessed chunk and commit it.

    Returns (codes, objective trace).  The trace holds the surrogate
    objective after each outer iteration.  On a non-finite objective the
    projection matrices are restored and RoundAborted is raised.
    """
    h = state.hyper
    saved = {n: getattr(state, n).copy() for n in ("w", "u", "v", "p")}
    b, weights = init_round(chunk, state, seed)
    trace = []
    try:
        for _ in range(h.iters):
            if h.beta > 0:
                state.u = update_u(stats, chunk, b, h)
            if h.mu > 0:
                state.p = update_p(stats, chunk, b, h)
            if h.theta > 0:
                state.v = update_v(stats, chunk, b, h)
            if h.tag_regression:
                weights = compute_reweights(
                    chunk.y, b, state.w, h.epsilon_norm)
                state.w = update_w(stats, chunk, b, weights, h)
            q = assemble_q(chunk, state, weights)
            b = update_b_dcc(q, b, state, weights)
            try:
                obj = objective_value(state, stats, chunk, b, weights)
            except FloatingPointError as exc:
                raise RoundAborted(str(exc)) from exc
            if not np.isfinite(obj):
                raise RoundAborted(
                    f"non-finite objective at round {state.round_index}")
            trace.append(obj)
    except RoundAborted:
        for n, a in saved.items():
            setattr(state, n, a)
        raise
    commit_round(state, stats, chunk, b, weights)
    return CodeBlock(b.astype(np.int8)), trace
