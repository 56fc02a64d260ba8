"""Bundled datasets: the Titanic contingency table and the Asym generator.

The Titanic survival table ships with explicit level lists (the conventional
Class/Sex/Age/Survived order) because discovered lexicographic level order
would not reproduce it.  Asym is a synthetic staged tree over four binary
variables with context-specific independences, used for classification
benchmarks; ``asym()`` draws a reproducible sample from it.
"""

from __future__ import annotations

import io

import numpy as np

from .data import Dataset, from_records
from .estimation import fit
from .tree import EventTree, StagedTree

__all__ = [
    "titanic",
    "titanic_counts_csv",
    "asym_generator",
    "asym",
    "ASYM_SAMPLE_SEED",
]

TITANIC_VARIABLES = [
    ("Class", ["1st", "2nd", "3rd", "Crew"]),
    ("Sex", ["Male", "Female"]),
    ("Age", ["Child", "Adult"]),
    ("Survived", ["No", "Yes"]),
]

# (class, sex, age) -> (No, Yes)
_TITANIC_CELLS = {
    ("1st", "Male", "Child"): (0, 5),
    ("1st", "Male", "Adult"): (118, 57),
    ("1st", "Female", "Child"): (0, 1),
    ("1st", "Female", "Adult"): (4, 140),
    ("2nd", "Male", "Child"): (0, 11),
    ("2nd", "Male", "Adult"): (154, 14),
    ("2nd", "Female", "Child"): (0, 13),
    ("2nd", "Female", "Adult"): (13, 80),
    ("3rd", "Male", "Child"): (35, 13),
    ("3rd", "Male", "Adult"): (387, 75),
    ("3rd", "Female", "Child"): (17, 14),
    ("3rd", "Female", "Adult"): (89, 76),
    ("Crew", "Male", "Child"): (0, 0),
    ("Crew", "Male", "Adult"): (670, 192),
    ("Crew", "Female", "Child"): (0, 0),
    ("Crew", "Female", "Adult"): (3, 20),
}


def titanic() -> Dataset:
    """The 2201-passenger Titanic survival table."""
    tree = EventTree(TITANIC_VARIABLES)
    counts = np.zeros(tree.n_cells)
    probe = Dataset(tree=tree, counts=counts)
    counts = counts.copy()
    for (c, s, a), (no, yes) in _TITANIC_CELLS.items():
        counts[probe.cell_index((c, s, a, "No"))] = no
        counts[probe.cell_index((c, s, a, "Yes"))] = yes
    return Dataset(tree=tree, counts=counts)


def titanic_counts_csv() -> bytes:
    """The Titanic table as a counts CSV with a ``Freq`` column."""
    buf = io.StringIO()
    buf.write("Class,Sex,Age,Survived,Freq\n")
    for (c, s, a), (no, yes) in _TITANIC_CELLS.items():
        buf.write(f"{c},{s},{a},No,{no}\n")
        buf.write(f"{c},{s},{a},Yes,{yes}\n")
    return buf.getvalue().encode("utf-8")


# -- Asym ---------------------------------------------------------------------

ASYM_SAMPLE_SEED = 2
_ASYM_N = 1000


def asym_generator() -> StagedTree:
    """The Asym data-generating staged tree over four binary variables.

    X2 tracks X1; X3 depends on X1 only in the X2 = "1" context; X4 depends
    on X1 only in the X3 = "1" context.  The asymmetric structure makes the
    class variable X1 recoverable from the other three far above its
    marginal rate, which is what the classification benchmark exercises.
    """
    tree = EventTree(
        [("X1", ["0", "1"]), ("X2", ["0", "1"]), ("X3", ["0", "1"]), ("X4", ["0", "1"])]
    )
    florets = {
        # stratum 1: X2 | X1
        (1, "1"): [0.80, 0.20],  # X1 = 0
        (1, "2"): [0.30, 0.70],  # X1 = 1
        # stratum 2: X3 | X1, X2 -- independent of X1 when X2 = 0
        (2, "1"): [0.50, 0.50],  # X2 = 0 (both X1 contexts)
        (2, "2"): [0.85, 0.15],  # X1 = 0, X2 = 1
        (2, "3"): [0.20, 0.80],  # X1 = 1, X2 = 1
        # stratum 3: X4 | X1, X2, X3 -- independent of (X1, X2) when X3 = 0
        (3, "1"): [0.60, 0.40],  # X3 = 0
        (3, "2"): [0.90, 0.10],  # X1 = 0, X3 = 1
        (3, "3"): [0.25, 0.75],  # X1 = 1, X3 = 1
    }
    root = [0.70, 0.30]
    stages = (
        ("1",),
        ("1", "2"),
        ("1", "2", "1", "3"),
        ("1", "2", "1", "2", "1", "3", "1", "3"),
    )
    # expected counts for a nominal sample reproduce the florets exactly at
    # lambda = 0, giving a fitted model with these as its stage distributions
    joint = np.ones(1)
    skeleton = StagedTree(tree=tree, stages=stages)
    probs = [{"1": np.asarray(root)}]
    for d in range(1, 4):
        probs.append(
            {s: np.asarray(p) for (dd, s), p in florets.items() if dd == d}
        )
    for d in range(4):
        rows = np.array([probs[d][s] for s in stages[d]])
        joint = (joint[:, None] * rows).ravel()
    ds = Dataset(tree=tree, counts=joint * _ASYM_N)
    return fit(skeleton, ds, lambda_=0.0)


def asym(n: int = _ASYM_N, seed: int = ASYM_SAMPLE_SEED) -> Dataset:
    """A reproducible sample of ``n`` records from the Asym generator."""
    from .query import sample_from

    generator = asym_generator()
    return from_records(generator.tree, sample_from(generator, n, seed))
