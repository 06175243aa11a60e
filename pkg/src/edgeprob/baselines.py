"""Microcanonical stochastic blockmodel entropy (nats), the competing quality function.

``S = sum_{r,s} ln Omega_rs`` where ``Omega_rs`` counts the ways to place the
``e_rs`` edges from block ``r`` to block ``s`` into its ``n_r * n_s`` directed
slots (self-loops included).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import CountMatrix, Partition

log = logging.getLogger(__name__)

VARIANTS = ("exact", "stirling", "multigraph")


@dataclass(frozen=True, eq=False)
class EntropyReport:
    partition: Partition
    variant: str
    entropy_nats: float
    per_block_pair_terms: np.ndarray
    collisions: int = 0

    def to_json(self, partition_name: str = "") -> dict:
        return {
            "partition_name": partition_name,
            "variant": self.variant,
            "entropy_nats": self.entropy_nats,
            "collisions": self.collisions,
        }


def log_binomial(n, k):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def binary_entropy(x):
    """``H_b(x)`` in nats with ``H_b(0) = H_b(1) = 0``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inner = (x > 0) & (x < 1)
    xi = x[inner]
    out[inner] = -xi * np.log(xi) - (1 - xi) * np.log1p(-xi)
    return out


def block_edge_counts(k: np.ndarray, partition: Partition) -> np.ndarray:
    b = partition.block_of
    p = partition.p
    flat = np.bincount((b[:, None] * p + b[None, :]).ravel(), weights=k.ravel(), minlength=p * p)
    return flat.reshape(p, p)


def microcanonical_entropy(counts: CountMatrix, partition: Partition, variant: str = "exact") -> EntropyReport:
    """Log-count of graphs compatible with the block edge counts.

    ``exact`` and ``stirling`` treat the graph as simple (multi-edges are
    clamped to 1 and the number clamped is reported as ``collisions``);
    ``exact`` sums ``ln C(n_r n_s, e_rs)`` and ``stirling`` its large-block
    form ``n_r n_s H_b(e_rs / n_r n_s)``. ``multigraph`` keeps multiplicities
    and counts multisets, ``ln C(n_r n_s + e_rs - 1, e_rs)``.
    """
    if partition.n != counts.n:
        raise ValueError(f"dimension mismatch: partition has {partition.n} nodes, counts {counts.n}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    sz = partition.sizes.astype(float)
    slots = np.outer(sz, sz)
    collisions = 0
    if variant == "multigraph":
        e = block_edge_counts(counts.k, partition)
        terms = log_binomial(slots + e - 1, e)
    else:
        adj = (counts.k > 0).astype(float)
        collisions = int(round(float((counts.k - adj).sum())))
        if collisions:
            log.warning("clamped %d repeated edges to build a simple graph", collisions)
        e = block_edge_counts(adj, partition)
        if variant == "exact":
            terms = log_binomial(slots, e)
        else:
            terms = slots * binary_entropy(e / slots)
    return EntropyReport(partition, variant, float(terms.sum()), terms, collisions)
