"""Derivative targets for the regression: exact re-evaluation or forward differences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .dictionary import eval_design
from .simulate import ModelSpec, Trajectory

Method = Literal["exact", "forward_difference"]


@dataclass(frozen=True)
class DerivativeMatrix:
    values: np.ndarray
    aligned_rows: np.ndarray
    method: Method


def exact_derivatives(model: ModelSpec, traj: Trajectory) -> DerivativeMatrix:
    """Evaluate the model right-hand side at every sampled state."""
    if traj.num_vars != model.num_vars:
        raise ValueError(
            f"trajectory has {traj.num_vars} variables, model has {model.num_vars}"
        )
    values = eval_design(model.dictionary, traj.states).values @ model.coeffs
    return DerivativeMatrix(values, np.arange(len(traj)), "exact")


def fd_derivatives(traj: Trajectory) -> DerivativeMatrix:
    """First-order forward differences; the last sample gets no derivative row."""
    x = traj.states
    if x.shape[0] < 2:
        raise ValueError("forward differences need at least two samples")
    values = (x[1:] - x[:-1]) / traj.dt
    return DerivativeMatrix(values, np.arange(x.shape[0] - 1), "forward_difference")


def derivatives(traj: Trajectory, method: str, model: ModelSpec | None = None) -> DerivativeMatrix:
    if method == "exact":
        if model is None:
            raise ValueError("exact derivatives require the generating model")
        return exact_derivatives(model, traj)
    if method in ("fd", "forward_difference"):
        return fd_derivatives(traj)
    raise ValueError(f"unknown derivative method {method!r}")
