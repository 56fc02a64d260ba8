"""Initial models, maximum-likelihood fitting and model scores.

``full`` starts from the saturated staging (every observed vertex its own
stage), ``indep`` from the one-stage-per-stratum staging.  Both collapse
zero-count subtrees into the reserved unobserved stage by default and fit
stage probabilities by Laplace-smoothed maximum likelihood,

    p_j = (n_j + lambda) / (m + lambda * k)

for a stage with per-level counts n_1..n_k summing to m.

Scores use the natural logarithm.  The degrees of freedom of a model count
(k - 1) parameters per stage and per stratum, the unobserved stage included
even though it holds no probabilities; this is the one convention consistent
with all the reference score values this package reproduces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .tree import EventTree, StagedTree

__all__ = [
    "ModelScore",
    "full",
    "indep",
    "collapse_unobserved",
    "fit",
    "refit",
    "loglik",
    "degrees_of_freedom",
    "aic",
    "bic",
    "score",
]


@dataclass(frozen=True)
class ModelScore:
    """logLik / df / AIC / BIC bundle for one fitted model."""

    loglik: float
    df: int
    aic: float
    bic: float
    n: float

    def report(self) -> str:
        return (
            f"logLik {self.loglik:.3f} df {self.df} "
            f"AIC {self.aic:.3f} BIC {self.bic:.3f}"
        )


def stage_distribution(counts: np.ndarray, lambda_: float) -> np.ndarray:
    """Smoothed maximum-likelihood floret distribution from level counts."""
    counts = np.asarray(counts, dtype=float)
    k = counts.size
    denom = counts.sum() + lambda_ * k
    if denom <= 0:
        raise ValueError(
            "stage with zero total count and no smoothing cannot be fitted"
        )
    return (counts + lambda_) / denom


def stage_loglik(counts: np.ndarray, lambda_: float) -> float:
    """Stage contribution sum_j n_j * ln p_j, with 0 * ln 0 = 0."""
    counts = np.asarray(counts, dtype=float)
    if counts.sum() == 0:
        return 0.0
    p = stage_distribution(counts, lambda_)
    nz = counts > 0
    return float(np.sum(counts[nz] * np.log(p[nz])))


def _zero_prefix_mask(ds: Dataset, d: int) -> np.ndarray:
    """Vertices of stratum d whose path prefix was never observed."""
    prefix_totals = ds.counts.reshape(ds.tree.stratum_size(d), -1).sum(axis=1)
    return prefix_totals == 0


def _collapsed_stages(
    tree: EventTree,
    ds: Dataset,
    stages: list[list[str]],
    name_unobserved: str,
) -> list[list[str]]:
    out = [list(s) for s in stages]
    for d in range(1, tree.n_variables):
        mask = _zero_prefix_mask(ds, d)
        for i in np.flatnonzero(mask):
            out[d][i] = name_unobserved
    return out


def _renumber_observed(stages: list[list[str]], name_unobserved: str) -> list[list[str]]:
    """Rename observed stages "1", "2", ... per stratum in first-member order."""
    out = []
    for labels in stages:
        mapping: dict[str, str] = {}
        new = []
        for label in labels:
            if label == name_unobserved:
                new.append(label)
                continue
            if label not in mapping:
                mapping[label] = str(len(mapping) + 1)
            new.append(mapping[label])
        out.append(new)
    return out


def fit(st: StagedTree, ds: Dataset, lambda_: float = 0.0) -> StagedTree:
    """Fit stage probabilities from ``ds`` under the model's staging.

    Raises if an observed stage has zero total count and ``lambda_`` is zero.
    """
    if st.tree != ds.tree:
        raise ValueError("model and dataset are over different event trees")
    if lambda_ < 0:
        raise ValueError("smoothing parameter must be non-negative")
    vertex_counts = ds.vertex_count_matrices()
    return _fit_from_counts(st, vertex_counts, lambda_)


def refit(st: StagedTree, lambda_: float | None = None) -> StagedTree:
    """Refit probabilities from the counts already stored on the model."""
    if st.vertex_counts is None:
        raise ValueError("model carries no counts to refit from")
    return _fit_from_counts(
        st, st.vertex_counts, st.lambda_ if lambda_ is None else lambda_
    )


def _fit_from_counts(
    st: StagedTree, vertex_counts, lambda_: float
) -> StagedTree:
    probs: list[dict[str, np.ndarray]] = []
    for d in range(st.tree.n_variables):
        by_stage: dict[str, np.ndarray] = {}
        for label, members in st.stage_members(d).items():
            if label == st.name_unobserved:
                continue
            counts = vertex_counts[d][members].sum(axis=0)
            by_stage[label] = stage_distribution(counts, lambda_)
        probs.append(by_stage)
    return StagedTree(
        tree=st.tree,
        stages=st.stages,
        name_unobserved=st.name_unobserved,
        lambda_=lambda_,
        fitted=True,
        vertex_counts=tuple(vertex_counts),
        probs=tuple(probs),
    )


def _initial(
    ds: Dataset,
    saturated: bool,
    order: list[str] | None,
    join_unobserved: bool,
    lambda_: float,
    name_unobserved: str,
) -> StagedTree:
    if order is not None:
        ds = ds.reorder(order)
    if ds.total_n <= 0:
        raise ValueError("cannot build an initial model from an empty dataset")
    tree = ds.tree
    stages: list[list[str]] = [["1"]]
    for d in range(1, tree.n_variables):
        size = tree.stratum_size(d)
        if saturated:
            stages.append([str(i + 1) for i in range(size)])
        else:
            stages.append(["1"] * size)
    if join_unobserved:
        stages = _collapsed_stages(tree, ds, stages, name_unobserved)
        stages = _renumber_observed(stages, name_unobserved)
    skeleton = StagedTree(
        tree=tree,
        stages=tuple(tuple(s) for s in stages),
        name_unobserved=name_unobserved,
    )
    return fit(skeleton, ds, lambda_)


def full(
    ds: Dataset,
    order: list[str] | None = None,
    join_unobserved: bool = True,
    lambda_: float = 0.0,
    name_unobserved: str = "na",
) -> StagedTree:
    """Saturated staged tree: every observed vertex in its own stage."""
    return _initial(ds, True, order, join_unobserved, lambda_, name_unobserved)


def indep(
    ds: Dataset,
    order: list[str] | None = None,
    join_unobserved: bool = True,
    lambda_: float = 0.0,
    name_unobserved: str = "na",
) -> StagedTree:
    """Mutual-independence staged tree: one observed stage per stratum."""
    return _initial(ds, False, order, join_unobserved, lambda_, name_unobserved)


def collapse_unobserved(
    st: StagedTree, ds: Dataset, name: str | None = None
) -> StagedTree:
    """Move every zero-count-prefix vertex into the per-stratum unobserved stage.

    A fitted input comes back fitted (the move does not change any observed
    stage's counts); an unfitted input keeps only the staging change.
    """
    if st.tree != ds.tree:
        raise ValueError("model and dataset are over different event trees")
    name = st.name_unobserved if name is None else name
    stages = _collapsed_stages(
        st.tree, ds, [list(s) for s in st.stages], name
    )
    out = StagedTree(
        tree=st.tree,
        stages=tuple(tuple(s) for s in stages),
        name_unobserved=name,
        lambda_=st.lambda_,
    )
    if st.fitted:
        return fit(out, ds, st.lambda_)
    return out


# -- scores -------------------------------------------------------------------


def loglik(st: StagedTree) -> float:
    """Log-likelihood of the fitted model on its own counts.

    Summation order is fixed (stratum-major, stages in first-member order,
    levels in order) so results are bit-stable.
    """
    if not st.fitted:
        raise ValueError("model is not fitted")
    total = 0.0
    for d in range(st.tree.n_variables):
        members = st.stage_members(d)
        for label in st.stage_labels(d):
            if label == st.name_unobserved:
                continue
            counts = st.vertex_counts[d][members[label]].sum(axis=0)
            total += stage_loglik(counts, st.lambda_)
    return total


def degrees_of_freedom(st: StagedTree) -> int:
    """Free-parameter count: per stratum, (#stages) * (next cardinality - 1).

    The unobserved stage counts as a stage of its stratum even though it
    carries no probability vector.
    """
    return sum(
        st.n_stages(d) * (st.tree.cards[d] - 1) for d in range(st.tree.n_variables)
    )


def aic(st: StagedTree) -> float:
    """Akaike information criterion, 2*df - 2*logLik."""
    return 2.0 * degrees_of_freedom(st) - 2.0 * loglik(st)


def bic(st: StagedTree) -> float:
    """Bayesian information criterion, df*ln(n) - 2*logLik."""
    n = st.total_n()
    if n <= 0:
        raise ValueError("BIC needs a positive sample size")
    return degrees_of_freedom(st) * math.log(n) - 2.0 * loglik(st)


def score(st: StagedTree) -> ModelScore:
    ll = loglik(st)
    df = degrees_of_freedom(st)
    n = st.total_n()
    return ModelScore(
        loglik=ll,
        df=df,
        aic=2.0 * df - 2.0 * ll,
        bic=df * math.log(n) - 2.0 * ll,
        n=n,
    )
