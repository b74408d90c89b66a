"""Compare the full model against its stripped-down variants.

woh    : full model
woh-1  : no pooled-embedding regression (theta = 0)
woh-2  : additionally drops the robust tag regression
woh-3  : no ridge regularization (alpha = 0)
"""
import numpy as np

from taghash.cli import ABLATION_VARIANTS
from taghash.engine import StreamTrainer
from taghash.evaluation import EvalJudgments, mean_average_precision
from taghash.model import Hyperparams
from taghash.retrieval import hash_queries
from taghash.synthetic import make_cluster_stream

stream = make_cluster_stream(seed=3)
judgments = EvalJudgments(query_labels=stream.query_labels,
                          db_labels=stream.db_labels)

for variant, overrides in ABLATION_VARIANTS.items():
    hyper = Hyperparams(r=16, m=150, f=8, c=9, **overrides)
    trainer = StreamTrainer(hyper, stream.table, seed=103)
    for x, y in stream.chunks:
        trainer.process_chunk(x, y)
    codes = hash_queries(stream.query_x, trainer.state)
    value, _ = mean_average_precision(codes, trainer.index(), judgments)
    print(f"{variant:6s}: MAP = {value:.4f}")
