"""Forward simulation of dictionary-defined ODE models.

Integration is adaptive Dormand-Prince 5(4) (scipy's ``RK45``) sampled on a
uniform grid through the method's dense-output interpolant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .dictionary import PolyDictionary, build_dictionary, eval_design

SIR_X0 = (0.99, 0.01, 0.0)
SIS_X0 = (0.99, 0.01)
DEFAULT_RTOL = 1e-3
DEFAULT_ATOL = 1e-6


class IntegrationError(RuntimeError):
    """Integration failed: step size underflow or a non-finite state."""


@dataclass(frozen=True)
class ModelSpec:
    dictionary: PolyDictionary
    coeffs: np.ndarray
    name: str = "model"
    compartments: tuple[str, ...] = field(default=())

    def __post_init__(self):
        w = np.array(self.coeffs, dtype=float)
        expected = (len(self.dictionary), self.dictionary.num_vars)
        if w.shape != expected:
            raise ValueError(f"coeffs shape {w.shape} does not match dictionary {expected}")
        w.setflags(write=False)
        object.__setattr__(self, "coeffs", w)
        if not self.compartments:
            names = tuple(f"x{i + 1}" for i in range(self.dictionary.num_vars))
            object.__setattr__(self, "compartments", names)
        elif len(self.compartments) != self.dictionary.num_vars:
            raise ValueError("one compartment name per state variable is required")

    @property
    def num_vars(self) -> int:
        return self.dictionary.num_vars

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "compartments": list(self.compartments),
            "dictionary": self.dictionary.to_json(),
            "coeffs": self.coeffs.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ModelSpec":
        return cls(
            dictionary=PolyDictionary.from_json(data["dictionary"]),
            coeffs=np.asarray(data["coeffs"], dtype=float),
            name=data.get("name", "model"),
            compartments=tuple(data.get("compartments", ())),
        )


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    dt: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if t.ndim != 1 or x.shape[0] != t.shape[0]:
            raise ValueError("times and states must have the same number of rows")
        if t.shape[0] < 2:
            raise ValueError("a trajectory needs at least two samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        steps = np.diff(t)
        if np.max(np.abs(steps - self.dt)) > 1e-12 * max(self.dt, np.max(np.abs(t))):
            raise ValueError("times are not uniformly spaced by dt")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def num_vars(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.times.shape[0]


def uniform_grid(t_end: float, dt: float) -> np.ndarray:
    """Grid ``0, dt, 2 dt, ...`` up to ``t_end`` (inclusive within rounding)."""
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = int(np.floor(t_end / dt + 1e-9)) + 1
    if n < 2:
        raise ValueError("t_end must be at least one step dt")
    return np.arange(n) * dt


def rhs(model: ModelSpec, state) -> np.ndarray:
    """Right-hand side ``Phi(x) W`` at a single state."""
    x = np.asarray(state, dtype=float)
    if x.shape != (model.num_vars,):
        raise ValueError(f"state must have length {model.num_vars}, got shape {x.shape}")
    return eval_design(model.dictionary, x).values[0] @ model.coeffs


def integrate(
    model: ModelSpec,
    x0,
    t_end: float,
    dt: float,
    rel_tol: float = DEFAULT_RTOL,
    abs_tol: float = DEFAULT_ATOL,
) -> Trajectory:
    """Integrate ``model`` from ``x0`` and sample on the uniform grid.

    Raises
    ------
    IntegrationError
        If the solver reports failure (typically step size underflow on a
        stiff or blowing-up system) or any stage produces a non-finite state.
    """
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.num_vars,):
        raise ValueError(f"x0 must have length {model.num_vars}")
    if not np.all(np.isfinite(x0)):
        raise IntegrationError("initial state is not finite")
    times = uniform_grid(t_end, dt)
    dictionary, w = model.dictionary, model.coeffs

    def f(t, x):
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite state encountered at t={t:.6g}")
        return eval_design(dictionary, x).values[0] @ w

    sol = solve_ivp(
        f,
        (0.0, float(times[-1])),
        x0,
        method="RK45",
        t_eval=times,
        rtol=rel_tol,
        atol=abs_tol,
    )
    if sol.status != 0:
        raise IntegrationError(f"integration failed: {sol.message}")
    states = sol.y.T
    if states.shape[0] != times.shape[0] or not np.all(np.isfinite(states)):
        raise IntegrationError("integration produced non-finite or truncated output")
    return Trajectory(times, states, dt)


def make_sir(beta: float, gamma: float) -> ModelSpec:
    """SIR model: S' = -beta SI, I' = beta SI - gamma I, R' = gamma I."""
    d = build_dictionary(3, 2)
    w = np.zeros((len(d), 3))
    si, i = d.index((1, 1, 0)), d.index((0, 1, 0))
    w[si, 0] = -beta
    w[si, 1] = beta
    w[i, 1] = -gamma
    w[i, 2] = gamma
    return ModelSpec(d, w, name="sir", compartments=("S", "I", "R"))


def make_sis() -> ModelSpec:
    """SIS model with S' = I/2 - 2 SI and I' = -S'."""
    d = build_dictionary(2, 2)
    w = np.zeros((len(d), 2))
    si, i = d.index((1, 1)), d.index((0, 1))
    w[i, 0], w[si, 0] = 0.5, -2.0
    w[i, 1], w[si, 1] = -0.5, 2.0
    return ModelSpec(d, w, name="sis", compartments=("S", "I"))
