"""Positions and the chain event graph.

Two vertices are in the same position when they are in the same stage and
their whole downstream staged subtrees coincide.  Positions are computed
bottom-up: all leaves form the sink, and two vertices of a stratum share a
position exactly when they share a stage and, level by level, their children
share positions.  One hash-signature sweep from the last stratum to the root
therefore suffices.

Unobserved vertices of a stratum form one position with no outgoing edges.

The CEG has one vertex per position plus the sink; each observed position
carries one edge per level of its next variable, labelled with the level and
the stage probability.  Parallel edges between two positions are kept
distinct.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import StagedTree

__all__ = ["Ceg", "positions", "ceg", "ceg_adjmat", "tree_to_dot", "ceg_to_dot"]

SINK = "u_inf"

# qualitative palette for DOT fills, cycled per stage index within a stratum
_PALETTE = (
    "#a6cee3", "#fdbf6f", "#b2df8a", "#fb9a99", "#cab2d6",
    "#ffff99", "#1f78b4", "#33a02c", "#e31a1c", "#ff7f00",
    "#6a3d9a", "#b15928",
)
_NA_COLOR = "#bdbdbd"


def positions(st: StagedTree) -> tuple[tuple[str, ...], ...]:
    """Position label of every non-leaf vertex, per stratum.

    Labels are ``"u0"`` for the root, then numbered in stratum order and
    first-member vertex order; all leaves share the implicit sink ``u_inf``.
    """
    if not st.fitted:
        raise ValueError("positions need a fitted model")
    tree = st.tree
    n = tree.n_variables
    local: list[list[int]] = [None] * n  # per stratum: class id per vertex
    child_ids: list[int] = [0] * tree.n_cells  # all leaves in the sink class
    for d in range(n - 1, -1, -1):
        size, card = tree.stratum_size(d), tree.cards[d]
        interning: dict[tuple, int] = {}
        ids = []
        for i in range(size):
            label = st.stages[d][i]
            if label == st.name_unobserved:
                sig: tuple = (st.name_unobserved,)
            else:
                sig = (label, tuple(child_ids[i * card + j] for j in range(card)))
            ids.append(interning.setdefault(sig, len(interning)))
        local[d] = ids
        child_ids = ids
    out: list[tuple[str, ...]] = []
    counter = 0
    for d in range(n):
        naming: dict[int, str] = {}
        labels = []
        for cid in local[d]:
            name = naming.get(cid)
            if name is None:
                name = f"u{counter}"
                counter += 1
                naming[cid] = name
            labels.append(name)
        out.append(tuple(labels))
    return tuple(out)


@dataclass(frozen=True)
class Ceg:
    """Chain event graph: the position partition of a staged tree plus the
    probability-labelled edges between positions, with a single sink."""

    source: StagedTree
    labels: tuple[tuple[str, ...], ...]  # per stratum, per vertex
    order: tuple[str, ...]  # root first, stratum order, sink last
    edges: tuple[tuple[str, str, str, float], ...]  # (from, to, level, prob)

    @property
    def root(self) -> str:
        return self.order[0]

    @property
    def sink(self) -> str:
        return SINK

    def position_members(self, d: int) -> dict[str, list[int]]:
        members: dict[str, list[int]] = {}
        for i, u in enumerate(self.labels[d]):
            members.setdefault(u, []).append(i)
        return members

    def path_probability(self, assignment) -> float:
        """Product of edge probabilities along the root-to-sink walk of a
        full assignment; zero when the walk dies in an unobserved position."""
        tree = self.source.tree
        if len(assignment) != tree.n_variables:
            raise ValueError("need one level per variable")
        by_src: dict[tuple[str, str], tuple[str, float]] = {}
        for src, dst, level, p in self.edges:
            by_src[(src, level)] = (dst, p)
        here = self.root
        value = 1.0
        for d, label in enumerate(assignment):
            level = tree.levels[d][tree.level_index(d, label)]
            hop = by_src.get((here, level))
            if hop is None:
                return 0.0
            here, p = hop
            value *= p
        return value


def ceg(st: StagedTree) -> Ceg:
    """Coalesce a fitted staged tree into its chain event graph."""
    labels = positions(st)
    tree = st.tree
    order: list[str] = []
    for d in range(tree.n_variables):
        for u in labels[d]:
            if u not in order:
                order.append(u)
    order.append(SINK)

    edges: list[tuple[str, str, str, float]] = []
    emitted: set[str] = set()
    for d in range(tree.n_variables):
        card = tree.cards[d]
        for i, u in enumerate(labels[d]):
            if u in emitted:
                continue
            emitted.add(u)
            stage = st.stages[d][i]
            if stage == st.name_unobserved:
                continue  # unobserved positions have no outgoing edges
            p = st.probs[d][stage]
            for j in range(card):
                child = i * card + j
                dst = labels[d + 1][child] if d + 1 < tree.n_variables else SINK
                edges.append((u, dst, tree.levels[d][j], float(p[j])))
    return Ceg(source=st, labels=labels, order=tuple(order), edges=tuple(edges))


def ceg_adjmat(c: Ceg) -> np.ndarray:
    """Integer adjacency matrix over positions (root first, sink last);
    entry (i, j) counts the parallel edges from position i to position j."""
    index = {u: i for i, u in enumerate(c.order)}
    out = np.zeros((len(c.order), len(c.order)), dtype=int)
    for src, dst, _, _ in c.edges:
        out[index[src], index[dst]] += 1
    return out


# -- DOT export ----------------------------------------------------------------


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def tree_vertices(st: StagedTree) -> list[tuple[int, int]]:
    """Vertices of the collapsed tree: unobserved vertices are terminal and
    leaves hang only below observed last-stratum vertices."""
    tree = st.tree
    out = []
    reachable = {0}
    for d in range(tree.n_variables):
        card = tree.cards[d]
        next_reachable = set()
        for i in range(tree.stratum_size(d)):
            if i not in reachable:
                continue
            out.append((d, i))
            if st.stages[d][i] == st.name_unobserved:
                continue
            for j in range(card):
                next_reachable.add(i * card + j)
        reachable = next_reachable
    out.extend((tree.n_variables, i) for i in sorted(reachable))
    return out


def tree_to_dot(st: StagedTree) -> str:
    """DOT digraph of the staged tree: nodes filled by stage within each
    stratum (stable palette by stage index), the unobserved stage gray,
    edges labelled ``level / probability`` to 4 decimals."""
    tree = st.tree
    lines = [
        "digraph staged_tree {",
        "  rankdir=LR;",
        '  node [style=filled, fontname="Helvetica"];',
    ]
    vertex_set = set(tree_vertices(st))
    for d, i in sorted(vertex_set):
        name = f"v{d}_{i}"
        if d == tree.n_variables:
            lines.append(f'  {name} [shape=point, fillcolor="#000000", label=""];')
            continue
        stage = st.stages[d][i]
        if stage == st.name_unobserved:
            color = _NA_COLOR
        else:
            stage_order = [s for s in st.stage_labels(d) if s != st.name_unobserved]
            color = _PALETTE[stage_order.index(stage) % len(_PALETTE)]
        lines.append(
            f'  {name} [shape=circle, fillcolor="{color}", '
            f'label="{_dot_escape(stage)}"];'
        )
    for d, i in sorted(vertex_set):
        if d == tree.n_variables or st.stages[d][i] == st.name_unobserved:
            continue
        card = tree.cards[d]
        p = st.probs[d].get(st.stages[d][i]) if st.fitted else None
        for j in range(card):
            child = (d + 1, i * card + j)
            if child not in vertex_set:
                continue
            label = _dot_escape(tree.levels[d][j])
            if p is not None:
                label = f"{label} / {p[j]:.4f}"
            lines.append(f'  v{d}_{i} -> v{child[0]}_{child[1]} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def ceg_to_dot(c: Ceg) -> str:
    """DOT digraph of a chain event graph; parallel edges stay distinct."""
    st = c.source
    lines = [
        "digraph ceg {",
        "  rankdir=LR;",
        '  node [style=filled, fontname="Helvetica"];',
    ]
    stage_of: dict[str, tuple[int, str]] = {}
    for d in range(st.tree.n_variables):
        for i, u in enumerate(c.labels[d]):
            stage_of.setdefault(u, (d, st.stages[d][i]))
    for u in c.order:
        if u == SINK:
            lines.append(f'  {u} [shape=doublecircle, fillcolor="#ffffff", label="sink"];')
            continue
        d, stage = stage_of[u]
        if stage == st.name_unobserved:
            color = _NA_COLOR
        else:
            stage_order = [s for s in st.stage_labels(d) if s != st.name_unobserved]
            color = _PALETTE[stage_order.index(stage) % len(_PALETTE)]
        lines.append(f'  {u} [shape=circle, fillcolor="{color}", label="{_dot_escape(u)}"];')
    for src, dst, level, p in c.edges:
        lines.append(
            f'  {src} -> {dst} [label="{_dot_escape(level)} / {p:.4f}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
