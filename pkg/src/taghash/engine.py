"""Streaming trainer tying kernelization, pooling, and optimization together.

One StreamTrainer consumes raw (features, tags) chunks in arrival order.
The anchor set is built from the first chunk and frozen; each later chunk
reuses it.  Per-round seeds are derived from (base seed, round index), so a
run resumed from a checkpoint is bit-identical to an uninterrupted one.
"""
import time

import numpy as np

from . import dataio
from .kernel import build_anchor_set, rbf_map
from .model import AccumStats, Hyperparams, ModelState, RoundData
from .optimizer import run_round
from .retrieval import snapshot_index
from .semantics import pool_semantics


class StreamTrainer:
    def __init__(self, hyper, table, seed):
        """hyper: Hyperparams (c and f must match the embedding table)."""
        if hyper.c != table.c or hyper.f != table.f:
            raise ValueError("hyperparameters disagree with embedding table")
        self.hyper = hyper
        self.table = table
        self.seed = int(seed)
        self.state = None            # created when the first chunk arrives
        self.stats = None
        self.code_blocks = []
        self.p_history = []
        self.traces = []
        self.round_times = []

    def prepare_round(self, x, y):
        """Kernelize features and pool tag semantics for one chunk."""
        phi = rbf_map(x, self.state.anchors)
        sem = pool_semantics(y, self.table)
        return RoundData(phi=phi, y=np.asarray(y, float), z=sem.z)

    def process_chunk(self, x, y):
        """Run one full round on a raw chunk; returns (codes, trace)."""
        x = np.asarray(x, dtype=np.float64)
        if self.state is None:
            anchors = build_anchor_set(x, self.hyper.m, self.seed)
            self.state = ModelState.fresh(anchors, self.hyper)
            self.stats = AccumStats.zeros(self.hyper)
        chunk = self.prepare_round(x, y)
        round_seed = [self.seed, self.state.round_index]
        start = time.perf_counter()
        codes, trace = run_round(self.state, self.stats, chunk, round_seed)
        self.round_times.append(time.perf_counter() - start)
        self.code_blocks.append(codes)
        self.p_history.append(self.state.p.copy())
        self.traces.append(trace)
        return codes, trace

    def index(self):
        """Retrieval snapshot over everything committed so far."""
        return snapshot_index(self.state, self.code_blocks)

    def round_snapshots(self):
        """(round, state-with-that-round's-projection, index) per round.

        Database codes are never re-hashed; only the query-side projection
        varies by round.
        """
        out = []
        rows = 0
        for i, p in enumerate(self.p_history):
            rows += self.code_blocks[i].n
            snap_state = ModelState(
                w=self.state.w, u=self.state.u, v=self.state.v, p=p,
                anchors=self.state.anchors, hyper=self.hyper,
                round_index=i + 1, total_seen=rows)
            index = snapshot_index(
                snap_state, self.code_blocks[:i + 1], model_round=i + 1)
            out.append((i + 1, snap_state, index))
        return out

    def save(self, path):
        dataio.save_checkpoint(
            path, self.state, self.stats, self.code_blocks,
            p_history=self.p_history, seed=self.seed)

    @classmethod
    def from_checkpoint(cls, path, table):
        state, stats, blocks, p_history, seed = dataio.load_checkpoint(path)
        trainer = cls(state.hyper, table, seed)
        trainer.state = state
        trainer.stats = stats
        trainer.code_blocks = blocks
        trainer.p_history = p_history
        return trainer
