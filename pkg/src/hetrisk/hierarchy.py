"""Cluster-level loadings: binary, first-principal-component, and level promotion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel import _frozen, check_nesting
from .stats import first_pc


@dataclass(frozen=True)
class ClusterWeights:
    """Per-row weights, unit norm within every cluster, and each cluster's top eigenvalue."""

    weights: np.ndarray
    cluster_of: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "cluster_of", _frozen(self.cluster_of, int))
        object.__setattr__(self, "lambdas", _frozen(self.lambdas))

    def loadings(self) -> np.ndarray:
        """Membership times weights: the N x K loadings delta_{G(i),A} w_i."""
        k = len(self.lambdas)
        out = np.zeros((len(self.weights), k))
        out[np.arange(len(self.weights)), self.cluster_of] = self.weights
        return out


def _labels(membership: np.ndarray) -> np.ndarray:
    return np.asarray(membership).argmax(axis=1)


def binary_loadings(membership: np.ndarray, normalized: bool = True) -> np.ndarray:
    m = np.asarray(membership, dtype=float)
    if not normalized:
        return m.copy()
    return m / np.sqrt(m.sum(axis=0))


def heterotic_weights(psi: np.ndarray, membership: np.ndarray, k_pc: int = 1) -> ClusterWeights:
    """First principal component of each cluster's correlation block.

    ``k_pc > 1`` takes the min(k_pc, N(A))-th component instead.
    """
    psi = np.asarray(psi, dtype=float)
    g = _labels(membership)
    k = np.asarray(membership).shape[1]
    w = np.zeros(len(g))
    lam = np.zeros(k)
    for a in range(k):
        idx = np.flatnonzero(g == a)
        if idx.size == 0:
            continue
        w[idx], lam[a] = first_pc(psi[np.ix_(idx, idx)], k_pc)
    return ClusterWeights(w, g, lam)


def uniform_weights(membership: np.ndarray) -> ClusterWeights:
    """Equal weights 1/sqrt(N_A); reproduces binary loadings."""
    m = np.asarray(membership, dtype=float)
    g = _labels(m)
    size = m.sum(axis=0)
    return ClusterWeights(1.0 / np.sqrt(size[g]), g, np.full(m.shape[1], np.nan))


def promote_loadings(coarser: np.ndarray, finer: np.ndarray) -> np.ndarray:
    """K x F map of finer clusters into coarser ones: (finer^T coarser) / colSums(finer)."""
    check_nesting(finer, coarser)
    finer = np.asarray(finer, dtype=float)
    coarser = np.asarray(coarser, dtype=float)
    return (finer.T @ coarser) / finer.sum(axis=0)[:, None]
