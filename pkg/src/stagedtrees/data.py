"""Loading categorical data and persisting staged tree models.

Datasets are dense contingency vectors over the product space of the event
tree, mixed-radix indexed with the first variable most significant (the same
addressing as tree vertices).  Counts are reals so weighted and smoothed data
flow through the same code paths.

Model files are JSON documents with extension ``.sevt.json``; see
:func:`save_model` for the schema.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .tree import EventTree, StagedTree

__all__ = [
    "Dataset",
    "load_records_csv",
    "load_counts_csv",
    "save_model",
    "load_model",
    "MODEL_FORMAT_VERSION",
]

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    """Contingency counts over the product space of an event tree."""

    tree: EventTree
    counts: np.ndarray = field(compare=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float).ravel()
        if counts.size != self.tree.n_cells:
            raise ValueError(
                f"{counts.size} cells for a product space of {self.tree.n_cells}"
            )
        if (counts < 0).any():
            raise ValueError("cell counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total_n(self) -> float:
        return float(self.counts.sum())

    def cell_index(self, labels) -> int:
        """Flat index of a full assignment given as one label per variable."""
        if len(labels) != self.tree.n_variables:
            raise ValueError("a cell needs one label per variable")
        idx = 0
        for d, label in enumerate(labels):
            idx = idx * self.tree.cards[d] + self.tree.level_index(d, label)
        return idx

    def reorder(self, order: list[str]) -> "Dataset":
        """Dataset over the same cells with variables permuted to ``order``."""
        perm = [self.tree.var_index(name) for name in order]
        if sorted(perm) != list(range(self.tree.n_variables)):
            raise ValueError("order must be a permutation of the tree's variables")
        grid = self.counts.reshape(self.tree.cards)
        tree = EventTree(
            [(self.tree.names[i], self.tree.levels[i]) for i in perm]
        )
        return Dataset(tree=tree, counts=grid.transpose(perm).ravel())

    def vertex_count_matrices(self) -> tuple[np.ndarray, ...]:
        """Per-stratum matrices of per-vertex count rows over the next variable."""
        grid = self.counts.reshape(self.tree.cards)
        out = []
        for d in range(self.tree.n_variables):
            m = grid.reshape(self.tree.stratum_size(d), self.tree.cards[d], -1)
            out.append(m.sum(axis=2))
        return tuple(out)

    def to_records(self) -> list[tuple[str, ...]]:
        """Expand to one record per observation; counts must be integral."""
        rounded = np.rint(self.counts)
        if not np.allclose(self.counts, rounded, atol=1e-9):
            raise ValueError("cannot expand non-integral counts to records")
        records = []
        for flat, c in enumerate(rounded.astype(int)):
            if c == 0:
                continue
            labels = _cell_labels(self.tree, flat)
            records.extend([labels] * c)
        return records


def _cell_labels(tree: EventTree, flat: int) -> tuple[str, ...]:
    digits = []
    for card in reversed(tree.cards):
        flat, j = divmod(flat, card)
        digits.append(j)
    return tuple(tree.levels[d][j] for d, j in enumerate(reversed(digits)))


def from_records(
    tree: EventTree, records, weights=None
) -> Dataset:
    """Accumulate labelled records (one label per variable) into a Dataset."""
    counts = np.zeros(tree.n_cells)
    ds = Dataset(tree=tree, counts=counts)  # reuse index arithmetic
    counts = counts.copy()
    if weights is None:
        weights = [1.0] * len(records)
    for rec, w in zip(records, weights):
        counts[ds.cell_index(rec)] += w
    return Dataset(tree=tree, counts=counts)


# -- CSV ingestion ----------------------------------------------------------


def _read_csv(data: bytes | str) -> tuple[list[str], list[list[str]]]:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]  # tolerate trailing blank lines
    if not rows:
        raise ValueError("empty CSV document")
    header, body = rows[0], rows[1:]
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: {len(row)} fields, header has {len(header)}")
        if any(v == "" for v in row):
            raise ValueError(f"line {lineno}: empty value (missing data is rejected)")
    return header, body


def _discover_tree(
    header: list[str],
    body: list[list[str]],
    order: list[str] | None,
    level_order_policy: str,
    levels: dict[str, list[str]] | None,
) -> EventTree:
    levels = levels or {}
    if order is not None:
        unknown = [v for v in order if v not in header]
        if unknown:
            raise ValueError(f"unknown variable(s) in order: {unknown}")
        if sorted(order) != sorted(header):
            raise ValueError("order must list every data column exactly once")
        columns = order
    else:
        columns = header
    col_pos = {name: header.index(name) for name in columns}

    variables = []
    for name in columns:
        if name in levels:
            lv = [str(l) for l in levels[name]]
            seen = {row[col_pos[name]] for row in body}
            missing = seen - set(lv)
            if missing:
                raise ValueError(f"variable {name!r}: values {sorted(missing)} not in declared levels")
        else:
            seen_order: dict[str, None] = {}
            for row in body:
                seen_order.setdefault(row[col_pos[name]], None)
            if level_order_policy == "lexicographic":
                lv = sorted(seen_order)
            elif level_order_policy == "first-appearance":
                lv = list(seen_order)
            else:
                raise ValueError(f"unknown level_order_policy {level_order_policy!r}")
        variables.append((name, lv))
    return EventTree(variables)


def load_records_csv(
    data: bytes | str,
    order: list[str] | None = None,
    level_order_policy: str = "lexicographic",
    levels: dict[str, list[str]] | None = None,
) -> Dataset:
    """Build a Dataset from a record-per-row CSV (RFC 4180, header mandatory).

    Every column is categorical and every row increments one cell by one.
    Levels are discovered per ``level_order_policy`` ("lexicographic" by
    default, or "first-appearance"); explicitly supplied ``levels`` win.
    Column order defines the variable order unless ``order`` is given.
    """
    header, body = _read_csv(data)
    if not body:
        raise ValueError("record CSV has a header but no rows")
    tree = _discover_tree(header, body, order, level_order_policy, levels)
    col_pos = [header.index(name) for name in tree.names]
    records = [tuple(row[c] for c in col_pos) for row in body]
    return from_records(tree, records)


def load_counts_csv(
    data: bytes | str,
    freq_column: str,
    order: list[str] | None = None,
    level_order_policy: str = "lexicographic",
    levels: dict[str, list[str]] | None = None,
) -> Dataset:
    """Build a Dataset from a contingency-count CSV.

    ``freq_column`` holds non-negative cell counts; the remaining columns are
    the categorical variables.  Counts of duplicate rows accumulate and cells
    never listed are zero.
    """
    header, body = _read_csv(data)
    if freq_column not in header:
        raise ValueError(f"frequency column {freq_column!r} not in header")
    fpos = header.index(freq_column)
    var_header = [h for h in header if h != freq_column]
    if not var_header:
        raise ValueError("no variable columns besides the frequency column")
    var_body = [[v for i, v in enumerate(row) if i != fpos] for row in body]
    tree = _discover_tree(var_header, var_body, order, level_order_policy, levels)

    weights = []
    for lineno, row in enumerate(body, start=2):
        try:
            w = float(row[fpos])
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric frequency {row[fpos]!r}") from None
        if w < 0 or not math.isfinite(w):
            raise ValueError(f"line {lineno}: negative or non-finite frequency")
        weights.append(w)
    col_pos = [var_header.index(name) for name in tree.names]
    records = [tuple(row[c] for c in col_pos) for row in var_body]
    return from_records(tree, records, weights)


# -- model persistence -------------------------------------------------------


def save_model(st: StagedTree) -> bytes:
    """Serialize a staged tree to JSON.

    Schema (version 1): top level ``{version, variables:[{name, levels}],
    lambda, name_unobserved, fitted, strata:[{stages:[{id, members, counts,
    probs, member_counts}]}]}`` with vertices listed by mixed-radix index.
    ``counts``/``probs`` are null for unfitted models and ``probs`` is null
    for the unobserved stage; ``member_counts`` keeps the per-vertex count
    rows (one per member, same order) so restrictions such as subtrees stay
    exact after a round trip.  Numbers round-trip bit-identically.
    """
    tree = st.tree
    strata = []
    for d in range(tree.n_variables):
        stages = []
        for label, members in st.stage_members(d).items():
            entry: dict = {"id": label, "members": members}
            if st.vertex_counts is not None:
                rows = st.vertex_counts[d][members]
                entry["counts"] = rows.sum(axis=0).tolist()
                entry["member_counts"] = rows.tolist()
            else:
                entry["counts"] = None
                entry["member_counts"] = None
            p = st.probs[d].get(label) if st.probs is not None else None
            entry["probs"] = None if p is None else p.tolist()
            stages.append(entry)
        strata.append({"stages": stages})
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "variables": [
            {"name": n, "levels": list(lv)} for n, lv in zip(tree.names, tree.levels)
        ],
        "lambda": st.lambda_,
        "name_unobserved": st.name_unobserved,
        "fitted": st.fitted,
        "strata": strata,
    }
    return json.dumps(doc, indent=1).encode("utf-8")


def load_model(data: bytes | str) -> StagedTree:
    """Parse a model document written by :func:`save_model`, validating the
    staging partition and probability vectors."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ValueError(f"not a JSON document: {e}") from None
    if not isinstance(doc, dict):
        raise ValueError("model document must be a JSON object")
    version = doc.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    for key in ("variables", "lambda", "strata"):
        if key not in doc:
            raise ValueError(f"model document lacks {key!r}")

    tree = EventTree([(v["name"], v["levels"]) for v in doc["variables"]])
    name_unobserved = str(doc.get("name_unobserved", "na"))
    fitted = bool(doc.get("fitted", False))
    lambda_ = float(doc["lambda"])

    if len(doc["strata"]) != tree.n_variables:
        raise ValueError("strata count does not match the variable count")

    stages: list[list[str]] = []
    vertex_counts: list[np.ndarray] = []
    probs: list[dict[str, np.ndarray]] = []
    any_counts = False
    any_probs = False
    for d, stratum in enumerate(doc["strata"]):
        size, k = tree.stratum_size(d), tree.cards[d]
        labels: list[str | None] = [None] * size
        seen_ids = set()
        counts_d = np.zeros((size, k))
        probs_d: dict[str, np.ndarray] = {}
        for entry in stratum["stages"]:
            label = str(entry["id"])
            if label in seen_ids:
                raise ValueError(f"stratum {d}: duplicate stage id {label!r}")
            seen_ids.add(label)
            members = entry["members"]
            if not members:
                raise ValueError(f"stratum {d}: stage {label!r} has no members")
            for i in members:
                if not isinstance(i, int) or not 0 <= i < size:
                    raise ValueError(
                        f"stage {label!r} claims vertex {i!r} outside stratum {d}"
                    )
                if labels[i] is not None:
                    raise ValueError(f"stratum {d}: vertex {i} listed in two stages")
                labels[i] = label
            if entry.get("member_counts") is not None:
                any_counts = True
                rows = np.asarray(entry["member_counts"], dtype=float)
                if rows.shape != (len(members), k):
                    raise ValueError(f"stage {label!r}: member_counts shape mismatch")
                counts_d[members] = rows
            elif entry.get("counts") is not None:
                # legacy documents without per-vertex rows: spread evenly
                any_counts = True
                agg = np.asarray(entry["counts"], dtype=float)
                if agg.shape != (k,):
                    raise ValueError(f"stage {label!r}: counts length mismatch")
                counts_d[members] = agg / len(members)
            p = entry.get("probs")
            if p is not None:
                any_probs = True
                p = np.asarray(p, dtype=float)
                if p.shape != (k,):
                    raise ValueError(f"stage {label!r}: probability length mismatch")
                probs_d[label] = p
            elif fitted and label != name_unobserved:
                raise ValueError(
                    f"fitted document lacks probabilities for stage {label!r} (stratum {d})"
                )
        if any(l is None for l in labels):
            raise ValueError(f"stratum {d}: some vertices belong to no stage")
        stages.append([l for l in labels])  # type: ignore[misc]
        vertex_counts.append(counts_d)
        probs.append(probs_d)

    return StagedTree(
        tree=tree,
        stages=tuple(tuple(s) for s in stages),
        name_unobserved=name_unobserved,
        lambda_=lambda_,
        fitted=fitted,
        vertex_counts=tuple(vertex_counts) if any_counts else None,
        probs=tuple(probs) if any_probs else None,
    )
