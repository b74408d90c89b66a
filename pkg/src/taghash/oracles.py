"""Independent reference implementations used only by the test suite.

Everything here recomputes quantities from first principles with plain
loops over concatenated data, deliberately sharing no matrix kernels with
the production paths.  Intended for test-scale inputs (n <= 2000); never
wire these into operational code.
"""
import numpy as np


def batch_stats(chunks, codes, frozen_weights, hyper):
    """Recompute every streaming statistic directly from full history.

    chunks: list of objects with phi, y, z; codes: list of (n, r) arrays;
    frozen_weights: list of (n,) arrays as they were at each commit.
    Returns a dict keyed like the AccumStats fields.
    """
    r, m, f, c = hyper.r, hyper.m, hyper.f, hyper.c
    out = {
        "c1": np.zeros((r, r)), "c2": np.zeros((r, m)),
        "c3": np.zeros((m, m)), "c4": np.zeros((m, r)),
        "c5": np.zeros((r, f)), "d1": np.zeros((r, r)),
        "d2": np.zeros((r, c)), "sy_weighted": 0.0, "sz": 0.0,
    }
    for chunk, b, k in zip(chunks, codes, frozen_weights):
        b = np.asarray(b, float)
        for i in range(b.shape[0]):
            bi = b[i]
            out["c1"] += np.outer(bi, bi)
            out["c2"] += np.outer(bi, chunk.phi[i])
            out["c3"] += np.outer(chunk.phi[i], chunk.phi[i])
            out["c4"] += np.outer(chunk.phi[i], bi)
            out["c5"] += np.outer(bi, chunk.z[i])
            out["d1"] += k[i] * np.outer(bi, bi)
            out["d2"] += k[i] * np.outer(bi, chunk.y[i])
            out["sy_weighted"] += k[i] * float(np.dot(chunk.y[i], chunk.y[i]))
            out["sz"] += float(np.dot(chunk.z[i], chunk.z[i]))
    return out


def dense_rank(query_dense, db_dense):
    """Rank +-1 database codes by disagreement count with one query code.

    Stable ascending order; returns (indices, distances).
    """
    q = np.asarray(query_dense)
    dists = []
    for row in np.asarray(db_dense):
        dists.append(int(sum(1 for a, b in zip(row, q) if a != b)))
    dists = np.asarray(dists)
    order = sorted(range(len(dists)), key=lambda i: (dists[i], i))
    order = np.asarray(order)
    return order, dists[order]


def naive_average_precision(ranked_relevance):
    """AP from a boolean relevance sequence in rank order, O(n^2) form."""
    rel = list(ranked_relevance)
    total = sum(rel)
    if total == 0:
        return None
    ap = 0.0
    for k in range(1, len(rel) + 1):
        if rel[k - 1]:
            hits = sum(rel[:k])
            ap += hits / k
    return ap / total


def naive_map(rankings, relevances):
    """MAP over (ranked ids, boolean relevance over ids) pairs.

    Queries with no relevant item are excluded.
    """
    aps = []
    for ranked_ids, relevant in zip(rankings, relevances):
        seq = [bool(relevant[i]) for i in ranked_ids]
        ap = naive_average_precision(seq)
        if ap is not None:
            aps.append(ap)
    return sum(aps) / len(aps) if aps else float("nan")
