"""Event tree lattice, vertex addressing, stage partitions and staged tree models.

An event tree over an ordered list of categorical variables has one stratum per
variable: the vertices at depth d enumerate all value prefixes of the first d
variables.  Vertices are addressed by (stratum, index) where the index is the
mixed-radix encoding of the prefix with the first variable most significant.

A staged tree is an event tree plus, for every stratum, a partition of its
vertices into stages.  Vertices in one stage share the conditional distribution
of the next variable.  Stage labels are plain strings, scoped per stratum; one
reserved label per tree (default ``"na"``) marks the stage collecting vertices
whose path prefix was never observed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "EventTree",
    "Vertex",
    "StagedTree",
    "encode_path",
    "decode_vertex",
    "as_staged_tree_from_bn",
]


class Vertex(NamedTuple):
    """Address of an event-tree vertex: depth and mixed-radix prefix index."""

    stratum: int
    index: int


@dataclass(frozen=True)
class EventTree:
    """Ordered categorical variables with named levels.

    ``variables`` is a sequence of ``(name, levels)`` pairs.  Names must be
    distinct, level labels distinct within a variable, and every variable
    needs at least two levels.
    """

    names: tuple[str, ...]
    levels: tuple[tuple[str, ...], ...]
    _level_index: tuple[dict, ...] = field(
        init=False, repr=False, compare=False, hash=False
    )

    def __init__(self, variables: Iterable[tuple[str, Sequence[str]]]):
        pairs = [(str(name), tuple(str(l) for l in lv)) for name, lv in variables]
        if not pairs:
            raise ValueError("an event tree needs at least one variable")
        names = tuple(name for name, _ in pairs)
        if len(set(names)) != len(names):
            raise ValueError("variable names must be distinct")
        for name, lv in pairs:
            if len(lv) < 2:
                raise ValueError(f"variable {name!r} needs at least 2 levels")
            if len(set(lv)) != len(lv):
                raise ValueError(f"variable {name!r} has duplicate level labels")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "levels", tuple(lv for _, lv in pairs))
        object.__setattr__(
            self,
            "_level_index",
            tuple({l: j for j, l in enumerate(lv)} for lv in self.levels),
        )

    @property
    def n_variables(self) -> int:
        return len(self.names)

    @property
    def cards(self) -> tuple[int, ...]:
        """Cardinality of each variable."""
        return tuple(len(lv) for lv in self.levels)

    @property
    def n_cells(self) -> int:
        """Size of the product space (number of leaves)."""
        return math.prod(self.cards)

    def stratum_size(self, d: int) -> int:
        """Number of vertices at depth ``d`` (prefixes of the first d variables)."""
        if not 0 <= d <= self.n_variables:
            raise ValueError(f"stratum {d} out of range")
        return math.prod(self.cards[:d])

    def var_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}") from None

    def level_index(self, var: int, label: str) -> int:
        try:
            return self._level_index[var][label]
        except KeyError:
            raise KeyError(
                f"unknown level {label!r} for variable {self.names[var]!r}"
            ) from None

    def describe(self) -> str:
        """One-line structure summary, e.g. ``Class[4] -> Sex[2]``."""
        return " -> ".join(f"{n}[{k}]" for n, k in zip(self.names, self.cards))


def encode_path(tree: EventTree, path: Sequence[str]) -> Vertex:
    """Mixed-radix address of the vertex reached by consuming ``path`` from the root.

    The first variable is most significant; the empty path is the root
    ``Vertex(0, 0)``.
    """
    if len(path) > tree.n_variables:
        raise ValueError(f"path of length {len(path)} exceeds {tree.n_variables} variables")
    index = 0
    for d, label in enumerate(path):
        index = index * tree.cards[d] + tree.level_index(d, label)
    return Vertex(len(path), index)


def decode_vertex(tree: EventTree, v: Vertex | tuple[int, int]) -> tuple[str, ...]:
    """Inverse of :func:`encode_path`: the level-label prefix of a vertex."""
    d, index = v
    if not 0 <= d <= tree.n_variables:
        raise ValueError(f"stratum {d} out of range")
    if not 0 <= index < tree.stratum_size(d):
        raise ValueError(f"vertex index {index} out of range for stratum {d}")
    digits = []
    for card in reversed(tree.cards[:d]):
        index, j = divmod(index, card)
        digits.append(j)
    return tuple(tree.levels[t][j] for t, j in enumerate(reversed(digits)))


def _child_index(tree: EventTree, d: int, index: int, level: int) -> int:
    """Index in stratum ``d+1`` of the ``level``-child of vertex ``(d, index)``."""
    return index * tree.cards[d] + level


def _validate_staging(
    tree: EventTree,
    stages: Sequence[Sequence[str]],
    name_unobserved: str,
) -> tuple[tuple[str, ...], ...]:
    if len(stages) != tree.n_variables:
        raise ValueError("staging must cover every stratum")
    out = []
    for d, labels in enumerate(stages):
        labels = tuple(str(s) for s in labels)
        if len(labels) != tree.stratum_size(d):
            raise ValueError(
                f"stratum {d}: {len(labels)} labels for {tree.stratum_size(d)} vertices"
            )
        out.append(labels)
    if len(set(out[0])) != 1:
        raise ValueError("the root must form a stage by its own")
    return tuple(out)


@dataclass(frozen=True)
class StagedTree:
    """An event tree with a per-stratum stage partition and, once fitted,
    per-stage counts and probability vectors.

    Stage labels are scoped within their stratum, so a partition can never
    span two strata (stratified by construction).  The reserved
    ``name_unobserved`` label marks the stage of zero-count prefixes; that
    stage carries no probability vector.

    Instances are immutable; every operation returns a new model.
    ``vertex_counts[d]`` holds one count row per vertex of stratum d over the
    levels of the next variable, so stage counts are always the sum over
    member vertices.
    """

    tree: EventTree
    stages: tuple[tuple[str, ...], ...]
    name_unobserved: str = "na"
    lambda_: float = 0.0
    fitted: bool = False
    vertex_counts: tuple[np.ndarray, ...] | None = None
    probs: tuple[dict[str, np.ndarray], ...] | None = None

    def __post_init__(self):
        object.__setattr__(
            self,
            "stages",
            _validate_staging(self.tree, self.stages, self.name_unobserved),
        )
        if self.lambda_ < 0:
            raise ValueError("smoothing parameter must be non-negative")
        if self.vertex_counts is not None:
            vc = []
            for d, m in enumerate(self.vertex_counts):
                m = np.asarray(m, dtype=float)
                want = (self.tree.stratum_size(d), self.tree.cards[d])
                if m.shape != want:
                    raise ValueError(f"stratum {d}: count matrix shape {m.shape} != {want}")
                if (m < 0).any():
                    raise ValueError("counts must be non-negative")
                m.setflags(write=False)
                vc.append(m)
            object.__setattr__(self, "vertex_counts", tuple(vc))
        if self.probs is not None:
            ps = []
            for d, by_stage in enumerate(self.probs):
                clean = {}
                for label, p in by_stage.items():
                    p = np.asarray(p, dtype=float)
                    if p.shape != (self.tree.cards[d],):
                        raise ValueError(f"stage {label!r} stratum {d}: bad probability length")
                    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
                        raise ValueError(f"stage {label!r} stratum {d}: not a probability vector")
                    p.setflags(write=False)
                    clean[str(label)] = p
                ps.append(clean)
            object.__setattr__(self, "probs", tuple(ps))
        if self.fitted:
            if self.probs is None or self.vertex_counts is None:
                raise ValueError("a fitted model needs counts and probabilities")
            for d in range(self.tree.n_variables):
                for label in self.stage_labels(d):
                    if label != self.name_unobserved and label not in self.probs[d]:
                        raise ValueError(
                            f"missing probabilities for stage {label!r} in stratum {d}"
                        )

    # -- partition views ----------------------------------------------------

    def stage_labels(self, d: int) -> list[str]:
        """Distinct stage labels of stratum ``d`` in first-member vertex order."""
        seen: dict[str, None] = {}
        for label in self.stages[d]:
            seen.setdefault(label, None)
        return list(seen)

    def observed_labels(self, d: int) -> list[str]:
        return [s for s in self.stage_labels(d) if s != self.name_unobserved]

    def stage_members(self, d: int) -> dict[str, list[int]]:
        members: dict[str, list[int]] = {}
        for i, label in enumerate(self.stages[d]):
            members.setdefault(label, []).append(i)
        return members

    def n_stages(self, d: int) -> int:
        """Number of stages in stratum ``d``, the unobserved one included."""
        return len(set(self.stages[d]))

    def stage_counts(self, d: int, label: str) -> np.ndarray:
        if self.vertex_counts is None:
            raise ValueError("model carries no counts")
        members = [i for i, s in enumerate(self.stages[d]) if s == label]
        if not members:
            raise KeyError(f"no stage {label!r} in stratum {d}")
        return self.vertex_counts[d][members].sum(axis=0)

    def stage_of_vertex(self, d: int, index: int) -> str:
        return self.stages[d][index]

    def total_n(self) -> float:
        if self.vertex_counts is None:
            raise ValueError("model carries no counts")
        return float(self.vertex_counts[0].sum())

    def prob_matrix(self, d: int) -> np.ndarray:
        """Per-vertex probability rows for stratum ``d``; unobserved rows are zero."""
        if not self.fitted:
            raise ValueError("model is not fitted")
        out = np.zeros((self.tree.stratum_size(d), self.tree.cards[d]))
        by_stage = self.probs[d]
        for i, label in enumerate(self.stages[d]):
            p = by_stage.get(label)
            if p is not None:
                out[i] = p
        return out

    def with_stages(self, stages: Sequence[Sequence[str]]) -> "StagedTree":
        """Same tree and counts under a new staging; drops the fit."""
        return StagedTree(
            tree=self.tree,
            stages=tuple(tuple(s) for s in stages),
            name_unobserved=self.name_unobserved,
            lambda_=self.lambda_,
            fitted=False,
            vertex_counts=self.vertex_counts,
            probs=None,
        )

    def describe(self) -> str:
        state = "fitted" if self.fitted else "unfitted"
        return f"Staged event tree ({state})\n{self.tree.describe()}"


def as_staged_tree_from_bn(
    tree: EventTree, parent_sets: dict[str, Iterable[str]]
) -> StagedTree:
    """Compile a Bayesian network, given as parent sets over the tree's variable
    order, into the staged tree encoding the same conditional independences.

    Two vertices of stratum d share a stage exactly when their prefixes agree
    on every parent of the variable emitted at depth d.  Every parent must
    come strictly earlier in the order.  No unobserved stage is created and
    the result is unfitted.
    """
    n = tree.n_variables
    parent_idx: list[list[int]] = [[] for _ in range(n)]
    for var, parents in parent_sets.items():
        v = tree.var_index(var)
        for p in parents:
            pi = tree.var_index(p)
            if pi >= v:
                raise ValueError(
                    f"parent {p!r} of {var!r} does not precede it in the variable order"
                )
            parent_idx[v].append(pi)
    for ps in parent_idx:
        ps.sort()

    stages: list[tuple[str, ...]] = [("1",)]
    for d in range(1, n):
        size = tree.stratum_size(d)
        labels = [""] * size
        key_to_label: dict[tuple[int, ...], str] = {}
        for i in range(size):
            digits = _prefix_digits(tree, d, i)
            key = tuple(digits[p] for p in parent_idx[d])
            label = key_to_label.get(key)
            if label is None:
                label = str(len(key_to_label) + 1)
                key_to_label[key] = label
            labels[i] = label
        stages.append(tuple(labels))
    return StagedTree(tree=tree, stages=tuple(stages))


def _prefix_digits(tree: EventTree, d: int, index: int) -> list[int]:
    digits = [0] * d
    for t in range(d - 1, -1, -1):
        index, digits[t] = divmod(index, tree.cards[t])
    return digits
