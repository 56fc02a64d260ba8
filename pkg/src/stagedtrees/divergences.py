"""Symmetric distances and divergences between floret probability vectors.

These back the distance-based staging searches (backward joining and the
clustering algorithms).  All of them are symmetric in their arguments, zero
exactly on equal vectors, and may return ``inf`` when the supports differ
(symmetrized Kullback-Leibler, symmetrized Renyi, Chan-Darwiche); an infinite
pair is never joined under any finite threshold.

Kinds and their short names:

==================  =====  =======================================================
kind                name   definition
==================  =====  =======================================================
kl_sym              kl     KL(p||q) + KL(q||p)
tv                  tv     0.5 * sum |p - q|
hellinger           hl     sqrt(1 - sum sqrt(p*q))
bhattacharyya       bh     -ln sum sqrt(p*q)
lp(p)               lp:p   (sum |p - q|^p)^(1/p), p >= 1
renyi_sym(alpha)    ry:a   D_a(p||q) + D_a(q||p), D_a = ln(sum p^a q^(1-a))/(a-1)
chan_darwiche       cd     ln max_i(p_i/q_i) - ln min_i(p_i/q_i)
==================  =====  =======================================================

Conventions: 0*ln(0/0) = 0 and x*ln(x/0) = inf inside KL; in the odds ratios
of Chan-Darwiche 0/0 = 1 and positive/0 = inf.  The default Renyi order is 2.
"""

from __future__ import annotations

from typing import Callable, Union

import numpy as np

__all__ = ["DivergenceSpec", "divergence", "parse_divergence", "pairwise"]

DivergenceSpec = Union[str, tuple, Callable[[np.ndarray, np.ndarray], float]]

DEFAULT_RENYI_ALPHA = 2.0


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    if np.any(q[mask] == 0):
        return float("inf")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_sym(p: np.ndarray, q: np.ndarray) -> float:
    return _kl(p, q) + _kl(q, p)


def tv(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def bhattacharyya(p: np.ndarray, q: np.ndarray) -> float:
    bc = float(np.sqrt(p * q).sum())
    if bc <= 0:
        return float("inf")
    return max(0.0, -np.log(min(bc, 1.0)))


def hellinger(p: np.ndarray, q: np.ndarray) -> float:
    bc = min(float(np.sqrt(p * q).sum()), 1.0)
    return float(np.sqrt(1.0 - bc))


def lp(p: np.ndarray, q: np.ndarray, power: float) -> float:
    if power < 1:
        raise ValueError("lp distance needs p >= 1")
    return float(np.sum(np.abs(p - q) ** power) ** (1.0 / power))


def _renyi(p: np.ndarray, q: np.ndarray, alpha: float) -> float:
    # support conventions follow the KL limits
    if alpha > 1 and np.any((p > 0) & (q == 0)):
        return float("inf")
    mask = p > 0
    s = float(np.sum(p[mask] ** alpha * q[mask] ** (1.0 - alpha)))
    if s == 0:
        return float("inf")
    return np.log(s) / (alpha - 1.0)


def renyi_sym(p: np.ndarray, q: np.ndarray, alpha: float = DEFAULT_RENYI_ALPHA) -> float:
    if alpha <= 0 or alpha == 1:
        raise ValueError("Renyi order must be positive and different from 1")
    return max(0.0, _renyi(p, q, alpha)) + max(0.0, _renyi(q, p, alpha))


def chan_darwiche(p: np.ndarray, q: np.ndarray) -> float:
    ratios = []
    for pi, qi in zip(p, q):
        if pi == 0 and qi == 0:
            ratios.append(1.0)
        elif qi == 0:
            return float("inf")
        elif pi == 0:
            ratios.append(0.0)
        else:
            ratios.append(pi / qi)
    lo, hi = min(ratios), max(ratios)
    if lo == 0:
        return float("inf")
    return float(np.log(hi) - np.log(lo))


_NAMES = {
    "kl_sym": "kl",
    "tv": "tv",
    "hellinger": "hl",
    "bhattacharyya": "bh",
    "lp": "lp",
    "renyi_sym": "ry",
    "chan_darwiche": "cd",
}
_BY_SHORT = {short: kind for kind, short in _NAMES.items()}


def parse_divergence(name: str) -> DivergenceSpec:
    """Resolve a command-line distance name such as ``kl``, ``lp:1.5`` or ``ry:0.5``."""
    base, _, param = name.partition(":")
    kind = _BY_SHORT.get(base, base)
    if kind in ("lp", "renyi_sym"):
        if param:
            return (kind, float(param))
        return (kind, 1.0 if kind == "lp" else DEFAULT_RENYI_ALPHA)
    if param:
        raise ValueError(f"distance {base!r} takes no parameter")
    if kind not in _NAMES:
        raise ValueError(f"unknown distance {name!r}")
    return kind


def divergence(spec: DivergenceSpec, p, q) -> float:
    """Distance between two probability vectors under ``spec``.

    ``spec`` is a kind name, a ``(kind, parameter)`` pair for the
    parametrized families, or any callable of two vectors.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1 or p.size < 2:
        raise ValueError("need two probability vectors of equal length >= 2")
    for v in (p, q):
        if (v < 0).any() or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError("arguments must sum to 1 and be non-negative")
    if callable(spec):
        return float(spec(p, q))
    if isinstance(spec, tuple):
        kind, param = spec
    else:
        kind, param = spec, None
    if kind == "kl_sym":
        return kl_sym(p, q)
    if kind == "tv":
        return tv(p, q)
    if kind == "hellinger":
        return hellinger(p, q)
    if kind == "bhattacharyya":
        return bhattacharyya(p, q)
    if kind == "lp":
        return lp(p, q, 1.0 if param is None else param)
    if kind == "renyi_sym":
        return renyi_sym(p, q, DEFAULT_RENYI_ALPHA if param is None else param)
    if kind == "chan_darwiche":
        return chan_darwiche(p, q)
    raise ValueError(f"unknown divergence kind {kind!r}")


def pairwise(spec: DivergenceSpec, vectors: list[np.ndarray]) -> np.ndarray:
    """Symmetric matrix of pairwise distances."""
    m = len(vectors)
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            out[i, j] = out[j, i] = divergence(spec, vectors[i], vectors[j])
    return out
