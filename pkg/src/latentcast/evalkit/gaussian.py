"""Gaussian fits over trajectory vectors and the closed-form Frechet distance.

FD between N(mu1, S1) and N(mu2, S2):
    FD^2 = ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2})
The cross term is computed via a symmetric eigendecomposition of
S1^{1/2} S2 S1^{1/2}, which shares its spectrum with S1 S2. Everything
runs in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["GaussianSummary", "fit_gaussian", "frechet_distance", "SHRINKAGE_RELATIVE", "SHRINKAGE_FLOOR"]

SHRINKAGE_RELATIVE = 1e-6
SHRINKAGE_FLOOR = 1e-12
_NEGATIVE_EIG_TOL = -1e-8


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray       # [d]
    cov: np.ndarray        # [d, d] symmetric PSD after shrinkage
    count: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_gaussian(vectors) -> GaussianSummary:
    """Sample mean and population covariance with trace shrinkage.

    Shrinkage lambda = 1e-6 * trace(S)/d plus an absolute 1e-12 floor so
    that degenerate (identical-vector) inputs still yield a PSD covariance.
    """
    rows = [v.values if hasattr(v, "values") else np.asarray(v, dtype=np.float64) for v in vectors]
    if len(rows) < 2:
        raise ValueError(f"fit_gaussian: need at least 2 vectors, got {len(rows)}")
    x = np.stack(rows).astype(np.float64)
    n, d = x.shape
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    cov = 0.5 * (cov + cov.T)
    lam = SHRINKAGE_RELATIVE * float(np.trace(cov)) / d + SHRINKAGE_FLOOR
    cov[np.diag_indices(d)] += lam
    return GaussianSummary(mean=mean, cov=cov, count=n)


def _psd_eigvals(sym: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < _NEGATIVE_EIG_TOL:
        raise ValueError(f"frechet_distance: {what} has negative eigenvalue {vals.min():.3e}")
    return np.clip(vals, 0.0, None), vecs


def frechet_distance(g1: GaussianSummary, g2: GaussianSummary) -> float:
    """Closed-form Gaussian Frechet (2-Wasserstein) distance.

    Squared distances below the float64 cancellation floor of the trace
    terms collapse to exactly 0 so that FD(g, g) == 0.
    """
    if g1.dim != g2.dim:
        raise ValueError(f"frechet_distance: dimension mismatch {g1.dim} vs {g2.dim}")
    diff = g1.mean - g2.mean
    vals1, vecs1 = _psd_eigvals(g1.cov, "first covariance")
    root1 = (vecs1 * np.sqrt(vals1)) @ vecs1.T
    inner = root1 @ g2.cov @ root1
    inner = 0.5 * (inner + inner.T)
    vals_m, _ = _psd_eigvals(inner, "cross product")
    tr_sqrt = float(np.sqrt(vals_m).sum())
    scale = float(diff @ diff) + float(np.trace(g1.cov)) + float(np.trace(g2.cov))
    fd2 = scale - 2.0 * tr_sqrt
    if fd2 < 1e-11 * max(1.0, scale):
        return 0.0
    return math.sqrt(fd2)
