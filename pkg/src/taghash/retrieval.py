"""Out-of-sample hashing and Hamming-space ranking.

Database codes are the codes learned when their chunk arrived; they are
never re-hashed when the projection later changes.  Queries always use the
latest projection.
"""
from dataclasses import dataclass

import numpy as np

from .codes import CodeBlock, hamming_distances, pack_codes
from .kernel import rbf_map


@dataclass
class RetrievalIndex:
    """Immutable snapshot of all committed codes, in round order."""

    packed: np.ndarray           # (N, ceil(r/64)) uint64
    ids: np.ndarray              # (N,) external record identifiers
    r: int
    model_round: int

    def __post_init__(self):
        self.ids = np.asarray(self.ids)
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError("index ids must be unique")

    @property
    def size(self):
        return self.packed.shape[0]


def hash_queries(x_q, state):
    """Hash raw query features: sign of projected kernel features.

    sign(0) resolves to +1, matching the optimizer's convention.
    """
    phi = rbf_map(x_q, state.anchors)
    proj = phi @ state.p
    dense = np.where(proj >= 0.0, 1, -1).astype(np.int8)
    return CodeBlock(dense)


def hamming_rank(query_packed, index, k=None):
    """Rank the database by Hamming distance to one packed query code.

    Ascending distance; ties broken by insertion order (stable).  Returns
    (ids, distances) of the top min(k, N) entries, or the full ranking when
    k is None.
    """
    query_packed = np.asarray(query_packed, dtype=np.uint64)
    if query_packed.shape != (index.packed.shape[1],):
        raise ValueError("query code length does not match index")
    dists = hamming_distances(query_packed, index.packed)
    order = np.argsort(dists, kind="stable")
    if k is not None:
        order = order[:k]
    return index.ids[order], dists[order]


def snapshot_index(state, code_blocks, ids=None, model_round=None):
    """Concatenate committed code blocks into a retrieval index.

    ids default to insertion order 0..N-1; model_round defaults to the
    state's committed round counter.
    """
    if model_round is None:
        model_round = state.round_index
    r = state.hyper.r
    if code_blocks:
        dense = np.concatenate([cb.dense for cb in code_blocks], axis=0)
        packed = pack_codes(dense)
    else:
        packed = np.zeros((0, (r + 63) // 64), dtype=np.uint64)
    n = packed.shape[0]
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    return RetrievalIndex(packed=packed, ids=ids, r=r,
                          model_round=model_round)
