"""Reference regressors: ordinary and sequentially thresholded least squares."""

from __future__ import annotations

import numpy as np

from .identify import DEFAULT_RANK_TOL, _min_norm_lstsq


def ols(design, targets, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Minimum-norm least squares for every target column at once."""
    phi = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if phi.shape[0] < 1 or phi.shape[0] != y.shape[0]:
        raise ValueError("design and targets need the same, non-zero number of rows")
    return np.column_stack([_min_norm_lstsq(phi, y[:, j], rank_tol) for j in range(y.shape[1])])


def stlsq(
    design,
    targets,
    threshold: float = 0.05,
    max_rounds: int = 20,
    rank_tol: float = DEFAULT_RANK_TOL,
    return_history: bool = False,
):
    """Sequentially thresholded least squares (the usual SINDy regressor).

    Each round zeroes coefficients with magnitude below ``threshold`` and
    refits every column on its surviving support. Stops at a fixed point or
    after ``max_rounds`` refits. With ``return_history`` the per-round support
    masks are returned as well.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    phi = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    w = ols(phi, y, rank_tol)
    support = np.abs(w) >= threshold
    history = [support.copy()]
    for _ in range(max_rounds):
        w = np.where(support, w, 0.0)
        for j in range(y.shape[1]):
            cols = np.flatnonzero(support[:, j])
            w[:, j] = 0.0
            if cols.size:
                w[cols, j] = _min_norm_lstsq(phi[:, cols], y[:, j], rank_tol)
        new_support = support & (np.abs(w) >= threshold)
        history.append(new_support.copy())
        if np.array_equal(new_support, support):
            break
        support = new_support
    w = np.where(support, w, 0.0)
    if return_history:
        return w, history
    return w
