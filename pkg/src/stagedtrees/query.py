"""Model interrogation: event probabilities, sampling, stage lookups,
subtrees, stage-structure comparison, summaries, prediction and the
likelihood-ratio test.

Event probabilities marginalize by dynamic programming down the strata rather
than enumerating leaves; paths entering an unobserved stage contribute zero.
Sampling uses numpy's PCG64 generator seeded per call, drawing one uniform per
sample and stratum in stratum order, so runs are reproducible across
platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .estimation import degrees_of_freedom, loglik
from .tree import StagedTree, Vertex, decode_vertex, encode_path

__all__ = [
    "prob",
    "atomic_prob_vector",
    "atomic_probs",
    "sample_from",
    "get_stage",
    "get_path",
    "subtree",
    "stndnaming",
    "StageDiff",
    "compare_stages",
    "ModelSummary",
    "summary",
    "floret_table",
    "predict",
    "LrTestResult",
    "lr_test",
    "chisq_upper_tail",
]


def _require_fitted(st: StagedTree) -> None:
    if not st.fitted:
        raise ValueError("model is not fitted")


def _constraint_levels(st: StagedTree, x: Mapping[str, str]) -> dict[int, int]:
    out = {}
    for var, label in x.items():
        d = st.tree.var_index(var)
        out[d] = st.tree.level_index(d, label)
    return out


def prob(st: StagedTree, x: Mapping[str, str], log: bool = False) -> float:
    """Probability of the event fixing the variables in ``x``.

    Sums the joint over every full assignment extending ``x``; the empty
    mapping yields the total mass.  With ``log=True`` the natural logarithm
    is returned (``-inf`` for zero).
    """
    _require_fitted(st)
    constraint = _constraint_levels(st, x)
    f = np.ones(1)
    for d in range(st.tree.n_variables):
        p = st.prob_matrix(d)
        if d in constraint:
            masked = np.zeros_like(p)
            masked[:, constraint[d]] = p[:, constraint[d]]
            p = masked
        f = (f[:, None] * p).ravel()
    value = float(f.sum())
    if log:
        return math.log(value) if value > 0 else -math.inf
    return value


def atomic_prob_vector(st: StagedTree) -> np.ndarray:
    """Joint probability of every cell, mixed-radix indexed like the dataset."""
    _require_fitted(st)
    f = np.ones(1)
    for d in range(st.tree.n_variables):
        f = (f[:, None] * st.prob_matrix(d)).ravel()
    return f


def atomic_probs(st: StagedTree) -> list[tuple[tuple[str, ...], float]]:
    """One (full assignment, probability) row per element of the product space."""
    vec = atomic_prob_vector(st)
    return [
        (decode_vertex(st.tree, Vertex(st.tree.n_variables, i)), float(p))
        for i, p in enumerate(vec)
    ]


def sample_from(st: StagedTree, n: int, seed: int) -> list[tuple[str, ...]]:
    """Draw ``n`` independent root-to-leaf walks from the fitted model.

    Raises if a walk would enter an unobserved stage, which can only happen
    when smoothing gave positive mass to a collapsed subtree.
    """
    _require_fitted(st)
    if n < 0:
        raise ValueError("sample size must be non-negative")
    rng = np.random.default_rng(seed)
    current = np.zeros(n, dtype=int)
    digits = []
    for d in range(st.tree.n_variables):
        p = st.prob_matrix(d)
        rows = p[current]
        if n and np.any(rows.sum(axis=1) < 0.5):
            raise ValueError(
                "a sample walked into an unobserved stage; the model assigns "
                "positive probability to a collapsed subtree"
            )
        cum = rows.cumsum(axis=1)
        u = rng.random(n)
        j = np.minimum((cum < u[:, None]).sum(axis=1), st.tree.cards[d] - 1)
        digits.append(j)
        current = current * st.tree.cards[d] + j
    return [
        tuple(st.tree.levels[d][digits[d][s]] for d in range(st.tree.n_variables))
        for s in range(n)
    ]


def get_stage(st: StagedTree, path: Sequence[str]) -> str:
    """Stage of the vertex reached by ``path``, governing the next variable."""
    if len(path) == 0:
        raise ValueError("path must name at least one level")
    if len(path) >= st.tree.n_variables:
        raise ValueError("path reaches a leaf, which has no stage")
    v = encode_path(st.tree, path)
    return st.stages[v.stratum][v.index]


def get_path(st: StagedTree, var: str, stage: str) -> list[tuple[str, ...]]:
    """All root paths arriving at a ``stage`` vertex of ``var``'s stratum,
    in mixed-radix index order."""
    d = st.tree.var_index(var)
    members = [i for i, s in enumerate(st.stages[d]) if s == stage]
    if not members:
        raise KeyError(f"no stage {stage!r} in the stratum of {var!r}")
    return [decode_vertex(st.tree, Vertex(d, i)) for i in members]


def subtree(st: StagedTree, path: Sequence[str]) -> StagedTree:
    """Staged tree over the remaining variables, rooted at the ``path`` vertex.

    Stagings, counts and probabilities are the restriction of the parent
    model; stage identities survive where any member vertex does.
    """
    from .tree import EventTree  # local to avoid cycle in type checkers

    d0 = len(path)
    if d0 >= st.tree.n_variables:
        raise ValueError("the subtree root must leave at least one variable")
    v0 = encode_path(st.tree, path)
    if d0 > 0 and st.stages[d0][v0.index] == st.name_unobserved and st.fitted:
        raise ValueError("cannot root a subtree at an unobserved vertex")
    tree = EventTree(
        [(st.tree.names[d], st.tree.levels[d]) for d in range(d0, st.tree.n_variables)]
    )
    stages = []
    counts = [] if st.vertex_counts is not None else None
    probs = [] if st.probs is not None else None
    for e in range(tree.n_variables):
        size = tree.stratum_size(e)
        lo = v0.index * size
        labels = list(st.stages[d0 + e][lo : lo + size])
        stages.append(tuple(labels))
        if counts is not None:
            counts.append(st.vertex_counts[d0 + e][lo : lo + size])
        if probs is not None:
            keep = set(labels)
            probs.append(
                {s: p for s, p in st.probs[d0 + e].items() if s in keep}
            )
    return StagedTree(
        tree=tree,
        stages=tuple(stages),
        name_unobserved=st.name_unobserved,
        lambda_=st.lambda_,
        fitted=st.fitted,
        vertex_counts=tuple(counts) if counts is not None else None,
        probs=tuple(probs) if probs is not None else None,
    )


def stndnaming(st: StagedTree) -> StagedTree:
    """Rename observed stages "1", "2", ... per stratum in order of their
    first member vertex; the unobserved stage keeps its reserved name."""
    stages = []
    remaps = []
    for d in range(st.tree.n_variables):
        mapping: dict[str, str] = {}
        labels = []
        for label in st.stages[d]:
            if label == st.name_unobserved:
                labels.append(label)
                continue
            if label not in mapping:
                mapping[label] = str(len(mapping) + 1)
            labels.append(mapping[label])
        stages.append(tuple(labels))
        remaps.append(mapping)
    probs = None
    if st.probs is not None:
        probs = tuple(
            {remaps[d].get(s, s): p for s, p in st.probs[d].items()}
            for d in range(st.tree.n_variables)
        )
    return StagedTree(
        tree=st.tree,
        stages=tuple(stages),
        name_unobserved=st.name_unobserved,
        lambda_=st.lambda_,
        fitted=st.fitted,
        vertex_counts=st.vertex_counts,
        probs=probs,
    )


@dataclass(frozen=True)
class StageDiff:
    """Vertex paths, per stratum, where two stage partitions disagree."""

    by_stratum: tuple[tuple[tuple[str, ...], ...], ...]

    @property
    def empty(self) -> bool:
        return all(len(s) == 0 for s in self.by_stratum)


def _partition_classes(st: StagedTree, d: int) -> list[frozenset[int]]:
    members = st.stage_members(d)
    return [frozenset(members[label]) for label in st.stages[d]]


def compare_stages(
    a: StagedTree, b: StagedTree, method: str = "stages"
) -> tuple[bool, StageDiff]:
    """Compare the stage structures of two models over the same event tree.

    Methods: ``"stages"`` tests per-stratum equality of the partitions as set
    partitions (labels are irrelevant); ``"naive"`` only compares the
    multisets of stage sizes; ``"hamming"`` compares per-vertex labels after
    canonical renaming.  The diff always lists the vertices whose equivalence
    classes differ.
    """
    if a.tree != b.tree:
        raise ValueError(
            "models are over different trees (variable order or levels differ)"
        )
    if method not in ("stages", "naive", "hamming"):
        raise ValueError(f"unknown comparison method {method!r}")
    diff: list[tuple[tuple[str, ...], ...]] = []
    equal = True
    ca = stndnaming(a)
    cb = stndnaming(b)
    for d in range(a.tree.n_variables):
        blocks_a = _partition_classes(a, d)
        blocks_b = _partition_classes(b, d)
        mismatch = tuple(
            decode_vertex(a.tree, Vertex(d, i))
            for i in range(a.tree.stratum_size(d))
            if blocks_a[i] != blocks_b[i]
        )
        diff.append(mismatch)
        if method == "stages":
            if mismatch:
                equal = False
        elif method == "naive":
            sizes_a = sorted(len(s) for s in set(blocks_a))
            sizes_b = sorted(len(s) for s in set(blocks_b))
            if sizes_a != sizes_b:
                equal = False
        else:  # hamming
            if ca.stages[d] != cb.stages[d]:
                equal = False
    return equal, StageDiff(by_stratum=tuple(diff))


@dataclass(frozen=True)
class ModelSummary:
    """Per stratum and stage: label, member-path count, sample size and the
    fitted floret distribution (None for the unobserved stage)."""

    variables: tuple[str, ...]
    levels: tuple[tuple[str, ...], ...]
    lambda_: float
    rows: tuple[tuple[tuple[str, int, float, tuple[float, ...] | None], ...], ...]

    def render(self) -> str:
        lines = [f"lambda: {self.lambda_:g}", "Stages:"]
        for d, name in enumerate(self.variables):
            lines.append(f"  Variable: {name}")
            header = "  stage  npaths  sample.size  " + "  ".join(self.levels[d])
            lines.append(header)
            for stage, npaths, size, p in self.rows[d]:
                cells = (
                    "  ".join(f"{x:.7f}" for x in p) if p is not None
                    else "  ".join("NA" for _ in self.levels[d])
                )
                lines.append(f"  {stage:>5}  {npaths:6d}  {size:11g}  {cells}")
            lines.append("  ------------")
        return "\n".join(lines)


def summary(st: StagedTree) -> ModelSummary:
    """Structured model summary; render() gives the printable table."""
    _require_fitted(st)
    rows = []
    for d in range(st.tree.n_variables):
        members = st.stage_members(d)
        ordered = [s for s in st.stage_labels(d) if s != st.name_unobserved]
        if st.name_unobserved in members:
            ordered.append(st.name_unobserved)
        stratum_rows = []
        for label in ordered:
            m = members[label]
            size = float(st.vertex_counts[d][m].sum())
            p = st.probs[d].get(label)
            stratum_rows.append(
                (
                    label,
                    len(m) if d > 0 else 0,
                    size,
                    tuple(float(x) for x in p) if p is not None else None,
                )
            )
        rows.append(tuple(stratum_rows))
    return ModelSummary(
        variables=st.tree.names,
        levels=st.tree.levels,
        lambda_=st.lambda_,
        rows=tuple(rows),
    )


def floret_table(st: StagedTree, var: str) -> list[tuple[str, str, float]]:
    """(stage, level, probability) rows for the stratum emitting ``var``."""
    _require_fitted(st)
    d = st.tree.var_index(var)
    out = []
    for label in st.stage_labels(d):
        p = st.probs[d].get(label)
        if p is None:
            continue
        for j, level in enumerate(st.tree.levels[d]):
            out.append((label, level, float(p[j])))
    return out


def predict(
    st: StagedTree, class_var: str, newdata: Iterable[Mapping[str, str]]
) -> list[str]:
    """Most probable value of ``class_var`` for each row of ``newdata``.

    Each row fixes every other variable; the returned level maximizes the
    joint probability of the completed assignment, with ties broken by level
    order.  Rows whose completions all have probability zero fall back to
    the class's marginal argmax.
    """
    _require_fitted(st)
    tree = st.tree
    cv = tree.var_index(class_var)
    atoms = atomic_prob_vector(st).reshape(tree.cards)
    other_axes = tuple(d for d in range(tree.n_variables) if d != cv)
    marginal = atoms.sum(axis=other_axes)
    fallback = int(np.argmax(marginal))
    out = []
    for row in newdata:
        idx: list = [0] * tree.n_variables
        for var in tree.names:
            if var == class_var:
                continue
            d = tree.var_index(var)
            if var not in row:
                raise KeyError(f"row lacks a value for variable {var!r}")
            idx[d] = tree.level_index(d, row[var])
        idx[cv] = slice(None)
        candidates = atoms[tuple(idx)]
        if float(candidates.max()) <= 0.0:
            out.append(tree.levels[cv][fallback])
        else:
            out.append(tree.levels[cv][int(np.argmax(candidates))])
    return out


# -- likelihood-ratio testing --------------------------------------------------


class LrTestResult(NamedTuple):
    statistic: float
    df: int
    p_value: float


def _refines(coarse: StagedTree, fine: StagedTree) -> bool:
    """True when every stage of ``fine`` sits inside one stage of ``coarse``."""
    for d in range(coarse.tree.n_variables):
        coarse_label = coarse.stages[d]
        for members in fine.stage_members(d).values():
            if len({coarse_label[i] for i in members}) > 1:
                return False
    return True


def lr_test(nested: StagedTree, general: StagedTree) -> LrTestResult:
    """Likelihood-ratio test of a coarser staging against a finer one.

    ``nested`` must be a per-stratum coarsening of ``general`` and both must
    be fitted on the same data.  Returns the statistic 2*(L_general -
    L_nested), the df difference and the upper-tail chi-square p-value.
    """
    _require_fitted(nested)
    _require_fitted(general)
    if nested.tree != general.tree:
        raise ValueError("models are over different trees")
    if abs(nested.total_n() - general.total_n()) > 1e-9:
        raise ValueError("models were fitted on different sample sizes")
    if not _refines(nested, general):
        raise ValueError("the first model is not a coarsening of the second")
    df = degrees_of_freedom(general) - degrees_of_freedom(nested)
    if df <= 0:
        raise ValueError("the general model must have more free parameters")
    stat = max(0.0, 2.0 * (loglik(general) - loglik(nested)))
    return LrTestResult(stat, df, chisq_upper_tail(stat, df))


def _upper_gamma_regularized(a: float, x: float) -> float:
    """Q(a, x), the regularized upper incomplete gamma function.

    Series expansion of P(a, x) below the a+1 crossover, Lentz's continued
    fraction above; both converge to full double precision here.
    """
    if x == 0.0:
        return 1.0
    log_prefactor = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        ap, term = a, 1.0 / a
        total = term
        for _ in range(1000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-17:
                break
        return max(0.0, 1.0 - total * math.exp(log_prefactor))
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return min(1.0, math.exp(log_prefactor) * h)


def chisq_upper_tail(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution,
    Q(df/2, x/2)."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x < 0:
        raise ValueError("the statistic must be non-negative")
    return _upper_gamma_regularized(df / 2.0, x / 2.0)
