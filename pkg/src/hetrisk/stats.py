"""Sample covariance/correlation and eigendecomposition with fixed conventions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TOL
from .errors import DegenerateReturnError, DomainError
from .panel import ReturnsPanel, _frozen


def sample_covariance(panel: ReturnsPanel | np.ndarray) -> np.ndarray:
    """Unbiased (divisor M) covariance of the rows."""
    x = panel.values if isinstance(panel, ReturnsPanel) else np.asarray(panel, dtype=float)
    c = np.cov(x, ddof=1)
    c = np.atleast_2d(c)
    return (c + c.T) / 2


def correlation(x: np.ndarray) -> np.ndarray:
    """Row correlation matrix with a unit diagonal set exactly."""
    c = sample_covariance(x)
    sd = np.sqrt(np.diag(c))
    if (sd <= 0).any():
        raise DegenerateReturnError(f"zero variance in row {int(np.flatnonzero(sd <= 0)[0])}")
    psi = c / np.outer(sd, sd)
    np.fill_diagonal(psi, 1.0)
    return psi


@dataclass(frozen=True)
class CorrelationModelInputs:
    sigma: np.ndarray
    psi: np.ndarray
    normalized: np.ndarray

    @property
    def variances(self) -> np.ndarray:
        return self.sigma ** 2


def correlation_inputs(panel: ReturnsPanel | np.ndarray) -> CorrelationModelInputs:
    x = panel.values if isinstance(panel, ReturnsPanel) else np.asarray(panel, dtype=float)
    c = sample_covariance(x)
    var = np.diag(c).copy()
    if (var <= 0).any():
        i = int(np.flatnonzero(var <= 0)[0])
        name = panel.tickers[i] if isinstance(panel, ReturnsPanel) else i
        raise DegenerateReturnError(f"zero sample variance for {name}")
    sigma = np.sqrt(var)
    psi = c / np.outer(sigma, sigma)
    np.fill_diagonal(psi, 1.0)
    return CorrelationModelInputs(_frozen(sigma), _frozen(psi), _frozen(x / sigma[:, None]))


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)


def _orient(vecs: np.ndarray) -> np.ndarray:
    # nonnegative column sum; a vanishing sum defers to the first nonzero entry
    vecs = vecs.copy()
    scale = np.abs(vecs).max(axis=0, initial=0.0)
    sums = vecs.sum(axis=0)
    for a in range(vecs.shape[1]):
        v = vecs[:, a]
        if abs(sums[a]) > 1e-12 * max(scale[a], 1.0) * np.sqrt(len(v)):
            flip = sums[a] < 0
        else:
            nz = np.flatnonzero(np.abs(v) > 1e-12 * max(scale[a], 1e-300))
            flip = bool(nz.size) and v[nz[0]] < 0
        if flip:
            vecs[:, a] = -v
    return vecs


def eigen_decreasing(matrix: np.ndarray) -> EigenSystem:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    if np.abs(a - a.T).max(initial=0.0) > TOL.symmetry:
        raise DomainError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh((a + a.T) / 2)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    return EigenSystem(_frozen(vals), _frozen(_orient(vecs)))


def first_pc(psi_block: np.ndarray, k: int = 1) -> tuple[np.ndarray, float]:
    """Leading unit eigenvector and its eigenvalue.

    ``k > 1`` returns the k-th component instead (capped at the block size).
    """
    psi_block = np.atleast_2d(np.asarray(psi_block, dtype=float))
    m = psi_block.shape[0]
    if m == 1:
        return np.ones(1), 1.0
    eig = eigen_decreasing(psi_block)
    a = min(k, m) - 1
    return eig.eigenvectors[:, a].copy(), float(eig.eigenvalues[a])


def principal_components(psi: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    eig = eigen_decreasing(psi)
    return eig.eigenvectors[:, :count].copy(), eig.eigenvalues[:count].copy()
