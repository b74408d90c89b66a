"""Synthetic clustered tag streams for demos and regression tests.

Samples come from three Gaussian clusters whose centers sit on an
equilateral triangle of configurable side length, with a per-sample radial
jitter so pairwise distances do not concentrate (concentrated distances
make the anchor kernel map nearly constant and the code optimization can
collapse).  Each cluster owns a disjoint block of tag columns; every tag
entry flips with a small probability to mimic noisy user tagging.  The
cluster mixture can shift across rounds, so early models have seen little
of some clusters; cluster identity doubles as the ground-truth evaluation
label (never shown to training).
"""
from dataclasses import dataclass

import numpy as np

from .semantics import EmbeddingTable

# round-by-round cluster proportions: round 1 barely sees cluster 2
SHIFTED_MIXTURE = (
    (0.60, 0.39, 0.01),
    (0.30, 0.30, 0.40),
    (0.30, 0.30, 0.40),
    (0.33, 0.33, 0.34),
)
BALANCED_MIXTURE = ((1 / 3, 1 / 3, 1 / 3),) * 4


@dataclass
class SyntheticStream:
    chunks: list                 # [(x, y)] per round
    chunk_labels: list           # one-hot cluster labels per round
    query_x: np.ndarray
    query_labels: np.ndarray
    table: EmbeddingTable

    @property
    def db_labels(self):
        return np.concatenate(self.chunk_labels, axis=0)


def _triangle_centers(d, side, rng):
    # equilateral triangle with the given side length, random orientation
    base = np.array([
        [1.0, 0.0],
        [-0.5, np.sqrt(3.0) / 2.0],
        [-0.5, -np.sqrt(3.0) / 2.0],
    ]) * (side / np.sqrt(3.0))
    q, _ = np.linalg.qr(rng.normal(0.0, 1.0, size=(d, 2)))
    return base @ q.T


def make_cluster_stream(n_rounds=4, n_per_round=200, d=32,
                        tags_per_cluster=3, flip_prob=0.1, f=8,
                        center_sep=7.0, cluster_std=1.0, radial_jitter=0.4,
                        embedding_scale=5.0, mixture=SHIFTED_MIXTURE,
                        n_queries=150, seed=0):
    """Build a 3-cluster stream of tagged features plus a balanced query set."""
    if len(mixture) < n_rounds:
        raise ValueError("mixture must list proportions for every round")
    rng = np.random.default_rng(seed)
    c = 3 * tags_per_cluster
    centers = _triangle_centers(d, center_sep, rng)
    table = EmbeddingTable(
        vectors=rng.normal(0.0, embedding_scale, size=(c, f)),
        tag_names=[f"tag{j}" for j in range(c)])

    def draw(n, props):
        which = rng.choice(3, size=n, p=props)
        scale = np.exp(rng.normal(0.0, radial_jitter, size=n))[:, None]
        x = centers[which] + scale * rng.normal(0.0, cluster_std, size=(n, d))
        clean = np.zeros((n, c), dtype=np.int8)
        for k in range(3):
            cols = slice(k * tags_per_cluster, (k + 1) * tags_per_cluster)
            clean[which == k, cols] = 1
        flips = rng.random((n, c)) < flip_prob
        y = np.where(flips, 1 - clean, clean).astype(np.int8)
        labels = np.eye(3, dtype=np.int8)[which]
        return x, y, labels

    chunks, chunk_labels = [], []
    for t in range(n_rounds):
        x, y, labels = draw(n_per_round, list(mixture[t]))
        chunks.append((x, y))
        chunk_labels.append(labels)
    qx, _, qlabels = draw(n_queries, [1 / 3, 1 / 3, 1 / 3])
    return SyntheticStream(
        chunks=chunks, chunk_labels=chunk_labels,
        query_x=qx, query_labels=qlabels, table=table)
