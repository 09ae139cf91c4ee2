"""Coefficient-recovery and timeseries-reconstruction error measures."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .simulate import Trajectory

DEFAULT_REL_FLOOR = 1e-12
FIELDS = ("mae", "two_norm", "maxvio", "f_mae", "f_rmse", "f_mre")
CSV_HEADER = ("method", "mae", "2-norm", "maxvio", "f_mae", "f_rmse", "f_mre")


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    two_norm: float
    maxvio: float
    f_mae: float
    f_rmse: float
    f_mre: float

    def as_dict(self) -> dict:
        return asdict(self)

    def row(self) -> list[float]:
        return [getattr(self, f) for f in FIELDS]


def coefficient_metrics(w_true, w_est) -> tuple[float, float, float]:
    """(max abs error, spectral norm of the error, max abs row sum of ``w_est``)."""
    a = np.asarray(w_true, dtype=float)
    b = np.asarray(w_est, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    err = b - a
    mae = float(np.max(np.abs(err), initial=0.0))
    two = float(np.linalg.norm(err, 2)) if err.size else 0.0
    maxvio = float(np.max(np.abs(b.sum(axis=1)), initial=0.0))
    return mae, two, maxvio


def timeseries_metrics(
    traj_true: Trajectory, traj_est: Trajectory, rel_floor: float = DEFAULT_REL_FLOOR
) -> tuple[float, float, float]:
    """(max abs, RMS, mean relative) error pooled over all samples and compartments."""
    if not rel_floor > 0:
        raise ValueError("rel_floor must be positive")
    if traj_true.states.shape != traj_est.states.shape or not np.allclose(
        traj_true.times, traj_est.times, rtol=1e-12, atol=0.0
    ):
        raise ValueError("trajectories are not on the same time grid")
    err = np.abs(traj_est.states - traj_true.states)
    f_mae = float(err.max())
    f_rmse = float(np.sqrt(np.mean(err**2)))
    f_mre = float(np.mean(err / np.maximum(np.abs(traj_true.states), rel_floor)))
    return f_mae, f_rmse, f_mre


def metrics_report(w_true, w_est, traj_true, traj_est, rel_floor=DEFAULT_REL_FLOOR) -> MetricsReport:
    return MetricsReport(
        *coefficient_metrics(w_true, w_est), *timeseries_metrics(traj_true, traj_est, rel_floor)
    )
