"""Staging-search algorithms.

All searches operate stratum by stratum (the scores decompose over strata) and
only ever touch observed stages: the unobserved stage is never joined, split
or moved.  Score gains are evaluated incrementally from per-stage count
vectors; a full recomputation guards every accepted move when assertions are
enabled.

Determinism: every algorithm is a pure function of (model, config).  Ties are
broken toward the lowest (stratum, vertex index, stage id); randomized
algorithms consume a single numpy PCG64 generator seeded from ``cfg.seed``
in documented order (strata ascending, iterations in sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .divergences import DivergenceSpec, divergence
from .estimation import refit, stage_distribution, stage_loglik
from .tree import StagedTree

__all__ = [
    "SearchConfig",
    "join_stages",
    "stages_hc",
    "stages_bhc",
    "stages_fbhc",
    "stages_bhcr",
    "stages_bj",
    "stages_hclust",
    "stages_kmeans",
]

SCORES = ("neg_bic", "neg_aic", "loglik")
LINKAGES = ("complete", "single", "average")

# accepted moves must beat this margin, so float noise on exact ties
# cannot produce improvement cycles
GAIN_TOL = 1e-9


@dataclass(frozen=True)
class SearchConfig:
    """Options shared by the staging searches.

    ``score`` is maximized ("neg_bic" by default); ``scope`` restricts the
    search to the strata of the named variables; ``thr`` is the joining
    threshold of ``stages_bj``; ``k`` the cluster count of the clustering
    searches; ``max_iter`` the iteration budget of ``stages_bhcr``.
    """

    score: str = "neg_bic"
    scope: frozenset[str] | None = None
    seed: int = 0
    max_iter: int = 100
    thr: float = 0.1
    k: int = 2
    distance: DivergenceSpec = "kl_sym"
    linkage: str = "complete"
    n_restarts: int = 10

    def __post_init__(self):
        if self.score not in SCORES:
            raise ValueError(f"unknown score {self.score!r}")
        if self.linkage not in LINKAGES:
            raise ValueError(f"unknown linkage {self.linkage!r}")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be positive")
        if self.scope is not None:
            object.__setattr__(self, "scope", frozenset(self.scope))


def _scoped_strata(st: StagedTree, cfg: SearchConfig) -> list[int]:
    """Strata searched: one per scoped variable, the root stratum excluded."""
    if cfg.scope is None:
        return list(range(1, st.tree.n_variables))
    out = []
    for name in cfg.scope:
        d = st.tree.var_index(name)  # raises on unknown variables
        if d >= 1:
            out.append(d)
    return sorted(out)


class _Stratum:
    """Mutable working copy of one stratum's partition during a search."""

    def __init__(self, st: StagedTree, d: int, cfg: SearchConfig):
        self.d = d
        self.card = st.tree.cards[d]
        self.na = st.name_unobserved
        self.lam = st.lambda_
        self.labels = list(st.stages[d])
        self.counts = np.asarray(st.vertex_counts[d], dtype=float)
        n = st.total_n()
        if cfg.score == "neg_bic":
            self.ll_weight, self.stage_penalty = 2.0, (self.card - 1) * math.log(n)
        elif cfg.score == "neg_aic":
            self.ll_weight, self.stage_penalty = 2.0, 2.0 * (self.card - 1)
        else:
            self.ll_weight, self.stage_penalty = 1.0, 0.0
        self.stage_counts: dict[str, np.ndarray] = {}
        self.stage_size: dict[str, int] = {}
        for i, label in enumerate(self.labels):
            if label == self.na:
                continue
            if label in self.stage_counts:
                self.stage_counts[label] = self.stage_counts[label] + self.counts[i]
                self.stage_size[label] += 1
            else:
                self.stage_counts[label] = self.counts[i].copy()
                self.stage_size[label] = 1

    # -- score terms --------------------------------------------------------

    def term(self, counts: np.ndarray) -> float:
        return self.ll_weight * stage_loglik(counts, self.lam) - self.stage_penalty

    def total(self) -> float:
        return sum(self.term(c) for c in self.stage_counts.values())

    def observed(self) -> list[str]:
        return sorted(self.stage_counts)

    def join_gain(self, a: str, b: str) -> float:
        ca, cb = self.stage_counts[a], self.stage_counts[b]
        return self.term(ca + cb) - self.term(ca) - self.term(cb)

    def move_gain(self, i: int, target: str | None) -> float:
        """Gain of moving vertex ``i`` to ``target`` (None = fresh stage)."""
        a = self.labels[i]
        row = self.counts[i]
        ca = self.stage_counts[a]
        delta = -self.term(ca)
        if self.stage_size[a] > 1:
            delta += self.term(ca - row)
        if target is None:
            delta += self.term(row)
        else:
            cb = self.stage_counts[target]
            delta += self.term(cb + row) - self.term(cb)
        return delta

    # -- mutations ------------------------------------------------------------

    def apply_join(self, a: str, b: str) -> None:
        """Merge stage ``b`` into ``a``."""
        self.stage_counts[a] = self.stage_counts[a] + self.stage_counts.pop(b)
        self.stage_size[a] += self.stage_size.pop(b)
        for i, label in enumerate(self.labels):
            if label == b:
                self.labels[i] = a
        self._check()

    def apply_move(self, i: int, target: str | None) -> str:
        a = self.labels[i]
        row = self.counts[i]
        if self.stage_size[a] == 1:
            del self.stage_counts[a]
            del self.stage_size[a]
        else:
            self.stage_counts[a] = self.stage_counts[a] - row
            self.stage_size[a] -= 1
        if target is None:
            target = self.fresh_label()
            self.stage_counts[target] = row.copy()
            self.stage_size[target] = 1
        else:
            self.stage_counts[target] = self.stage_counts[target] + row
            self.stage_size[target] += 1
        self.labels[i] = target
        self._check()
        return target

    def fresh_label(self) -> str:
        used = set(self.labels)
        m = 1
        while str(m) in used:
            m += 1
        return str(m)

    def _check(self) -> None:
        if not __debug__:
            return
        fresh: dict[str, np.ndarray] = {}
        for i, label in enumerate(self.labels):
            if label == self.na:
                continue
            fresh[label] = fresh.get(label, 0) + self.counts[i]
        assert set(fresh) == set(self.stage_counts)
        for label, c in fresh.items():
            assert np.allclose(c, self.stage_counts[label], atol=1e-8)


def _finish(st: StagedTree, new_labels: dict[int, list[str]]) -> StagedTree:
    stages = [
        tuple(new_labels[d]) if d in new_labels else st.stages[d]
        for d in range(st.tree.n_variables)
    ]
    return refit(st.with_stages(stages))


def _require_fitted(st: StagedTree) -> None:
    if not st.fitted:
        raise ValueError("structure search needs a fitted model")


def join_stages(st: StagedTree, stratum: int, a: str, b: str) -> StagedTree:
    """Merge observed stage ``b`` of ``stratum`` into ``a`` and refit."""
    if a == b:
        raise ValueError("cannot join a stage with itself")
    if not 1 <= stratum < st.tree.n_variables:
        raise ValueError(f"stratum {stratum} out of searchable range")
    present = set(st.stages[stratum])
    for label in (a, b):
        if label not in present:
            raise ValueError(f"no stage {label!r} in stratum {stratum}")
        if label == st.name_unobserved:
            raise ValueError("the unobserved stage cannot be joined")
    if st.vertex_counts is None:
        raise ValueError("model carries no counts")
    labels = [a if s == b else s for s in st.stages[stratum]]
    return _finish(st, {stratum: labels})


# -- score-based searches ------------------------------------------------------


def stages_hc(st: StagedTree, cfg: SearchConfig | None = None) -> StagedTree:
    """Hill climbing over single-vertex moves.

    For each scoped stratum, repeatedly applies the best positive-gain move of
    one vertex to another stage or to a fresh singleton stage, until no move
    improves the score.  Existing target stages are scanned in label order
    with the fresh-stage option last; on equal gain the earliest candidate in
    (vertex index, target) order wins.
    """
    _require_fitted(st)
    cfg = cfg or SearchConfig()
    out: dict[int, list[str]] = {}
    for d in _scoped_strata(st, cfg):
        state = _Stratum(st, d, cfg)
        while True:
            best_gain, best_move = GAIN_TOL, None
            for i, a in enumerate(state.labels):
                if a == state.na:
                    continue
                targets: list[str | None] = [t for t in state.observed() if t != a]
                if state.stage_size[a] > 1:
                    targets.append(None)
                for t in targets:
                    gain = state.move_gain(i, t)
                    if gain > best_gain:
                        best_gain, best_move = gain, (i, t)
            if best_move is None:
                break
            state.apply_move(*best_move)
        out[d] = state.labels
    return _finish(st, out)


def stages_bhc(st: StagedTree, cfg: SearchConfig | None = None) -> StagedTree:
    """Backward hill climbing: best-improvement pairwise stage joins."""
    _require_fitted(st)
    cfg = cfg or SearchConfig()
    out: dict[int, list[str]] = {}
    for d in _scoped_strata(st, cfg):
        state = _Stratum(st, d, cfg)
        while True:
            best_gain, best_pair = GAIN_TOL, None
            ids = state.observed()
            for x, a in enumerate(ids):
                for b in ids[x + 1 :]:
                    gain = state.join_gain(a, b)
                    if gain > best_gain:
                        best_gain, best_pair = gain, (a, b)
            if best_pair is None:
                break
            state.apply_join(*best_pair)
        out[d] = state.labels
    return _finish(st, out)


def stages_fbhc(st: StagedTree, cfg: SearchConfig | None = None) -> StagedTree:
    """Fast backward hill climbing: first-improvement pairwise joins.

    Pairs are scanned in lexicographic stage-id order; the first join whose
    gain is positive is applied and the scan restarts.  Terminates when a
    full scan finds no improving pair.
    """
    _require_fitted(st)
    cfg = cfg or SearchConfig()
    out: dict[int, list[str]] = {}
    for d in _scoped_strata(st, cfg):
        state = _Stratum(st, d, cfg)
        improved = True
        while improved:
            improved = False
            ids = state.observed()
            for x, a in enumerate(ids):
                for b in ids[x + 1 :]:
                    if state.join_gain(a, b) > GAIN_TOL:
                        state.apply_join(a, b)
                        improved = True
                        break
                if improved:
                    break
        out[d] = state.labels
    return _finish(st, out)


def stages_bhcr(st: StagedTree, cfg: SearchConfig | None = None) -> StagedTree:
    """Random backward hill climbing.

    Runs exactly ``cfg.max_iter`` iterations; each draws a scoped stratum
    uniformly, then (when that stratum still has at least two observed
    stages) an unordered stage pair uniformly, joining it if the score gain
    is positive.  Reproducible given ``cfg.seed``.
    """
    _require_fitted(st)
    cfg = cfg or SearchConfig()
    rng = np.random.default_rng(cfg.seed)
    strata = _scoped_strata(st, cfg)
    if not strata:
        return refit(st)
    states = {d: _Stratum(st, d, cfg) for d in strata}
    for _ in range(cfg.max_iter):
        d = strata[int(rng.integers(len(strata)))]
        state = states[d]
        ids = state.observed()
        m = len(ids)
        if m < 2:
            continue
        i = int(rng.integers(m))
        j = int(rng.integers(m - 1))
        if j >= i:
            j += 1
        a, b = min(ids[i], ids[j]), max(ids[i], ids[j])
        if state.join_gain(a, b) > GAIN_TOL:
            state.apply_join(a, b)
    return _finish(st, {d: s.labels for d, s in states.items()})


# -- distance-based searches ---------------------------------------------------


def _stage_vectors(state: _Stratum) -> tuple[list[str], list[np.ndarray]]:
    ids = sorted(state.stage_counts, key=lambda s: state.labels.index(s))
    return ids, [stage_distribution(state.stage_counts[s], state.lam) for s in ids]


def stages_bj(st: StagedTree, cfg: SearchConfig | None = None) -> StagedTree:
    """Backward joining on floret distances.

    Per scoped stratum, repeatedly joins the pair of observed stages at
    minimum divergence while that minimum is strictly below ``cfg.thr``,
    refitting the merged distribution after every join.  Ties go to the
    lexicographically first stage-id pair.  Infinite distances never join.
    """
    _require_fitted(st)
    cfg = cfg or SearchConfig()
    out: dict[int, list[str]] = {}
    for d in _scoped_strata(st, cfg):
        state = _Stratum(st, d, cfg)
        while True:
            ids = state.observed()
            if len(ids) < 2:
                break
            vecs = {
                s: stage_distribution(state.stage_counts[s], state.lam) for s in ids
            }
            best_dist, best_pair = math.inf, None
            for x, a in enumerate(ids):
                for b in ids[x + 1 :]:
                    dist = divergence(cfg.distance, vecs[a], vecs[b])
                    if dist < best_dist:
                        best_dist, best_pair = dist, (a, b)
            if best_pair is None or not best_dist < cfg.thr:
                break
            state.apply_join(*best_pair)
        out[d] = state.labels
    return _finish(st, out)


def _linkage_distance(base: np.ndarray, ca: list[int], cb: list[int], linkage: str) -> float:
    cross = base[np.ix_(ca, cb)]
    if linkage == "complete":
        return float(cross.max())
    if linkage == "single":
        return float(cross.min())
    return float(cross.mean())


def stages_hclust(st: StagedTree, cfg: SearchConfig | None = None) -> StagedTree:
    """Agglomerative clustering of stage distributions into ``cfg.k`` stages.

    Uses ``cfg.distance`` between floret vectors and ``cfg.linkage``
    (complete by default).  Infinite distances are merged only when nothing
    finite is left, so disconnected supports merge last.  The unobserved
    stage is excluded and ``cfg.k`` counts observed stages only.
    """
    _require_fitted(st)
    cfg = cfg or SearchConfig()
    out: dict[int, list[str]] = {}
    for d in _scoped_strata(st, cfg):
        state = _Stratum(st, d, cfg)
        ids, vecs = _stage_vectors(state)
        if cfg.k > len(ids):
            raise ValueError(
                f"k={cfg.k} exceeds the {len(ids)} observed stages of stratum {d}"
            )
        base = np.zeros((len(ids), len(ids)))
        for x in range(len(ids)):
            for y in range(x + 1, len(ids)):
                base[x, y] = base[y, x] = divergence(cfg.distance, vecs[x], vecs[y])
        clusters: list[list[int]] = [[x] for x in range(len(ids))]
        while len(clusters) > cfg.k:
            best, pair = math.inf, (0, 1)
            for x in range(len(clusters)):
                for y in range(x + 1, len(clusters)):
                    dist = _linkage_distance(base, clusters[x], clusters[y], cfg.linkage)
                    if dist < best:
                        best, pair = dist, (x, y)
            x, y = pair
            clusters[x] = clusters[x] + clusters[y]
            del clusters[y]
        for members in clusters:
            keep = ids[min(members)]
            for other in members:
                if ids[other] != keep:
                    state.apply_join(keep, ids[other])
        out[d] = state.labels
    return _finish(st, out)


def _lloyd(
    vectors: np.ndarray, k: int, rng: np.random.Generator, n_restarts: int
) -> np.ndarray:
    """K-means assignments minimizing within-cluster sum of squares."""
    n = vectors.shape[0]
    best_wcss, best_assign = math.inf, None
    for _ in range(n_restarts):
        centers = vectors[rng.choice(n, size=k, replace=False)].copy()
        assign = np.full(n, -1)
        for _ in range(100):
            d2 = ((vectors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_assign = d2.argmin(axis=1)  # ties -> lowest center index
            for c in range(k):
                if not (new_assign == c).any():
                    worst = int(d2[np.arange(n), new_assign].argmax())
                    new_assign[worst] = c
            if (new_assign == assign).all():
                break
            assign = new_assign
            for c in range(k):
                centers[c] = vectors[assign == c].mean(axis=0)
        wcss = float(((vectors - centers[assign]) ** 2).sum())
        if wcss < best_wcss - 1e-12:
            best_wcss, best_assign = wcss, assign.copy()
    return best_assign


def stages_kmeans(st: StagedTree, cfg: SearchConfig | None = None) -> StagedTree:
    """K-means clustering of stage distributions into ``cfg.k`` stages.

    Lloyd's algorithm in Euclidean geometry with ``cfg.n_restarts`` random
    initializations drawn from one generator seeded by ``cfg.seed``; the
    restart with the lowest within-cluster sum of squares wins.
    """
    _require_fitted(st)
    cfg = cfg or SearchConfig()
    rng = np.random.default_rng(cfg.seed)
    out: dict[int, list[str]] = {}
    for d in _scoped_strata(st, cfg):
        state = _Stratum(st, d, cfg)
        ids, vecs = _stage_vectors(state)
        if cfg.k > len(ids):
            raise ValueError(
                f"k={cfg.k} exceeds the {len(ids)} observed stages of stratum {d}"
            )
        assign = _lloyd(np.array(vecs), cfg.k, rng, cfg.n_restarts)
        for c in range(cfg.k):
            members = [x for x in range(len(ids)) if assign[x] == c]
            if not members:
                continue
            keep = ids[members[0]]
            for other in members[1:]:
                state.apply_join(keep, ids[other])
        out[d] = state.labels
    return _finish(st, out)
