"""Deterministic 2-D PCA projection for plotting the populations."""

from __future__ import annotations

import numpy as np

__all__ = ["pca_projection"]


def pca_projection(features: np.ndarray, components: int = 2) -> np.ndarray:
    """Project mean-centred rows onto the leading right singular vectors.

    Each component's sign is chosen so its largest-magnitude loading is
    positive.  Components beyond the numerical rank come back as zeros.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise ValueError(f"need at least a 2x2 feature matrix, got shape {X.shape}")
    if components < 1:
        raise ValueError("components must be >= 1")
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    tol = max(Xc.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    out = np.zeros((X.shape[0], components))
    for k in range(min(components, Vt.shape[0])):
        if s[k] <= tol:
            break
        v = Vt[k]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        out[:, k] = Xc @ v
    return out
