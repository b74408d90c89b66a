"""Retrieval metrics: average precision, MAP per round, precision@k.

Relevance is defined by ground-truth labels, never by training tags: a
database item is relevant to a query iff their label sets intersect.
Queries with no relevant item in the database are excluded from MAP and
counted.
"""
from dataclasses import dataclass

import numpy as np

from .retrieval import hamming_rank, hash_queries


@dataclass
class EvalJudgments:
    """Binary label matrices for queries and database records."""

    query_labels: np.ndarray     # (n_q, L)
    db_labels: np.ndarray        # (N, L), rows aligned to database ids

    def relevance(self, query_idx):
        """Boolean relevance of every database id to one query."""
        q = self.query_labels[query_idx]
        return (self.db_labels @ q) > 0


def average_precision(ranked_ids, relevant, total_relevant=None):
    """AP of one ranked list against a boolean relevance array over ids.

    total_relevant is the number of relevant items in the database being
    ranked; it defaults to the count over the whole relevance array.
    Returns None when the database holds no relevant item (the query is
    excluded from MAP by the caller).
    """
    relevant = np.asarray(relevant, dtype=bool)
    if total_relevant is None:
        total_relevant = int(relevant.sum())
    if total_relevant == 0:
        return None
    ranked_ids = np.asarray(ranked_ids)
    if ranked_ids.size == 0:
        raise ValueError("ranked list is empty")
    hits = relevant[ranked_ids]
    denom = min(total_relevant, len(ranked_ids))
    cum = np.cumsum(hits)
    prec = cum / np.arange(1, len(ranked_ids) + 1)
    return float(np.sum(prec[hits]) / denom)


def precision_at_k(ranked_ids, relevant, k):
    """Fraction of the top k that are relevant.

    A cutoff past the end of the list is computed over the available prefix.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = np.asarray(relevant, dtype=bool)
    top = np.asarray(ranked_ids)[:k]
    return float(np.mean(relevant[top]))


def mean_average_precision(query_codes, index, judgments, cutoff=None):
    """MAP over all queries with at least one relevant database item.

    Returns (map_value, n_excluded).
    """
    aps = []
    excluded = 0
    for qi in range(query_codes.n):
        rel = judgments.relevance(qi)
        in_db = int(rel[index.ids].sum())
        if in_db == 0:
            excluded += 1
            continue
        ids, _ = hamming_rank(query_codes.packed[qi], index, cutoff)
        aps.append(average_precision(ids, rel, in_db))
    if not aps:
        return float("nan"), excluded
    return float(np.mean(aps)), excluded


def map_per_round(snapshots, query_features, judgments, cutoff=None):
    """MAP at each round of a training run.

    snapshots: iterable of (round, ModelState-like with that round's hash
    projection, RetrievalIndex of codes committed up to that round).
    Queries are hashed with each round's own projection.  Returns a list of
    (round, map_value) rows ready for CSV emission.
    """
    rows = []
    for rnd, state, index in snapshots:
        codes = hash_queries(query_features, state)
        value, _ = mean_average_precision(codes, index, judgments, cutoff)
        rows.append((rnd, value))
    return rows
