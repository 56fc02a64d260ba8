"""Train/test evaluation of staging searches as classifiers.

The protocol: the dataset is expanded to records, and for each of
``n_splits`` seeded resamples 80% of the records (without replacement) train
a model with the chosen algorithm while the held-out 20% are classified by
predicting the class variable, the first in the variable order.  Split
permutations come from one generator seeded by ``seed``, consumed in split
order, so runs are reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import learn
from .data import Dataset, from_records
from .estimation import full, indep, score
from .query import predict
from .tree import StagedTree

__all__ = ["SplitResult", "EvaluationReport", "evaluate", "ALGORITHMS"]

ALGORITHMS = {
    "hc": learn.stages_hc,
    "bhc": learn.stages_bhc,
    "fbhc": learn.stages_fbhc,
    "bhcr": learn.stages_bhcr,
    "bj": learn.stages_bj,
    "hclust": learn.stages_hclust,
    "kmeans": learn.stages_kmeans,
}

# hill climbing also splits stages, so it can start from the independence
# model; the backward and clustering searches need the saturated one
DEFAULT_INIT = {"hc": "indep"}


@dataclass(frozen=True)
class SplitResult:
    split: int
    df: int
    loglik: float
    aic: float
    bic: float
    accuracy: float
    seconds: float


@dataclass(frozen=True)
class EvaluationReport:
    algorithm: str
    class_var: str
    splits: tuple[SplitResult, ...]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([s.accuracy for s in self.splits]))

    def rows(self) -> list[tuple]:
        out = [
            (s.split, s.df, s.loglik, s.aic, s.bic, s.accuracy, s.seconds)
            for s in self.splits
        ]
        cols = list(zip(*[r[1:] for r in out]))
        out.append(("mean",) + tuple(float(np.mean(c)) for c in cols))
        return out

    def to_csv(self) -> str:
        lines = ["split,df,logLik,AIC,BIC,accuracy,seconds"]
        for row in self.rows():
            split, df, ll, a, b, acc, sec = row
            dfs = f"{df:.3f}" if isinstance(df, float) else str(df)
            lines.append(
                f"{split},{dfs},{ll:.3f},{a:.3f},{b:.3f},{acc:.7f},{sec:.3f}"
            )
        return "\n".join(lines) + "\n"


def _train(algorithm: str, train: Dataset, cfg: learn.SearchConfig, init: str | None) -> StagedTree:
    init = init or DEFAULT_INIT.get(algorithm, "full")
    start = indep(train) if init == "indep" else full(train)
    return ALGORITHMS[algorithm](start, cfg)


def evaluate(
    ds: Dataset,
    algorithm: str,
    seed: int,
    cfg: learn.SearchConfig | None = None,
    n_splits: int = 10,
    train_fraction: float = 0.8,
    init: str | None = None,
) -> EvaluationReport:
    """Cross-validated accuracy of ``algorithm`` predicting the first variable."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    cfg = cfg or learn.SearchConfig(seed=seed)
    records = ds.to_records()
    n = len(records)
    n_train = int(n * train_fraction)
    if n_train == 0 or n_train == n:
        raise ValueError("dataset too small to split")
    class_var = ds.tree.names[0]
    rng = np.random.default_rng(seed)
    results = []
    for s in range(n_splits):
        perm = rng.permutation(n)
        train_records = [records[i] for i in perm[:n_train]]
        test_records = [records[i] for i in perm[n_train:]]
        t0 = time.perf_counter()
        model = _train(algorithm, from_records(ds.tree, train_records), cfg, init)
        seconds = time.perf_counter() - t0
        rows = [
            {v: r[d] for d, v in enumerate(ds.tree.names) if v != class_var}
            for r in test_records
        ]
        predicted = predict(model, class_var, rows)
        hits = sum(p == r[0] for p, r in zip(predicted, test_records))
        sc = score(model)
        results.append(
            SplitResult(
                split=s,
                df=sc.df,
                loglik=sc.loglik,
                aic=sc.aic,
                bic=sc.bic,
                accuracy=hits / len(test_records),
                seconds=seconds,
            )
        )
    return EvaluationReport(
        algorithm=algorithm, class_var=class_var, splits=tuple(results)
    )
