"""Dense two-phase simplex solver for small inequality-form linear programs.

Problems have the form::

    minimize    c @ x
    subject to  A @ x <= b
                x[j] >= 0   for non-negative variables, free otherwise

Free variables are split into positive and negative parts, every inequality
gets a slack column, and rows with a negative right-hand side start from an
artificial variable. Pivoting uses Bland's rule (lowest eligible index enters,
ties in the ratio test leave by lowest basis index), so the pivot sequence is
deterministic and cannot cycle.

Setting the environment variable ``SPARSE_COMPARTMENTS_LP_TRACE`` to a file
path appends every pivot and the tableau after it to that file.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Literal

import numpy as np

log = logging.getLogger(__name__)

VarKind = Literal["free", "non_negative"]
Status = Literal["optimal", "infeasible", "unbounded", "iteration_limit"]

TRACE_ENV = "SPARSE_COMPARTMENTS_LP_TRACE"
_PIVOT_TOL = 1e-10
_RATIO_TIE = 1e-12


class LpCertificateError(RuntimeError):
    """A solution declared optimal failed its feasibility/dual re-check."""


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    ineq_matrix: np.ndarray
    ineq_rhs: np.ndarray
    var_kinds: tuple[VarKind, ...]

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        a = np.asarray(self.ineq_matrix, dtype=float)
        b = np.asarray(self.ineq_rhs, dtype=float).ravel()
        n = c.shape[0]
        if n < 1:
            raise ValueError("a linear program needs at least one variable")
        if a.size == 0:
            a = a.reshape(b.shape[0], n)
        if a.ndim != 2 or a.shape != (b.shape[0], n):
            raise ValueError(f"inequality matrix shape {a.shape} inconsistent with n={n}, m={b.shape[0]}")
        kinds = tuple(self.var_kinds)
        if len(kinds) != n:
            raise ValueError("one var_kind per variable is required")
        bad = set(kinds) - {"free", "non_negative"}
        if bad:
            raise ValueError(f"unknown variable kinds {sorted(bad)}")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "ineq_matrix", a)
        object.__setattr__(self, "ineq_rhs", b)
        object.__setattr__(self, "var_kinds", kinds)


@dataclass(frozen=True)
class LpOptions:
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-9
    max_iterations: int = 10_000


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective_value: float
    status: Status
    iterations: int


class _Tableau:
    """Canonical-form tableau ``T x = rhs`` with an explicit basis list."""

    def __init__(self, body, rhs, basis, trace):
        self.body = body
        self.rhs = rhs
        self.basis = list(basis)
        self.cost_row = None
        self.trace = trace

    def set_costs(self, costs):
        cb = costs[self.basis]
        self.cost_row = costs - cb @ self.body

    def pivot(self, row: int, col: int):
        p = self.body[row, col]
        self.body[row] /= p
        self.rhs[row] /= p
        for i in range(self.body.shape[0]):
            if i != row:
                f = self.body[i, col]
                if f != 0.0:
                    self.body[i] -= f * self.body[row]
                    self.rhs[i] -= f * self.rhs[row]
        f = self.cost_row[col]
        if f != 0.0:
            self.cost_row -= f * self.body[row]
        self.body[:, col] = 0.0
        self.body[row, col] = 1.0
        self.cost_row[col] = 0.0
        self.basis[row] = col
        if self.trace is not None:
            self.trace.write(f"pivot row={row} col={col}\n")
            self.trace.write(np.array2string(np.column_stack([self.body, self.rhs]), max_line_width=10_000))
            self.trace.write("\n")

    def entering(self, tol: float, allowed: int):
        for j in range(allowed):
            if self.cost_row[j] < -tol:
                return j
        return None

    def leaving(self, col: int):
        column = self.body[:, col]
        best, best_ratio = None, np.inf
        for i in np.flatnonzero(column > _PIVOT_TOL):
            ratio = max(self.rhs[i], 0.0) / column[i]
            if ratio < best_ratio - _RATIO_TIE * max(1.0, abs(best_ratio) if np.isfinite(best_ratio) else 1.0):
                best, best_ratio = i, ratio
            elif abs(ratio - best_ratio) <= _RATIO_TIE * max(1.0, abs(best_ratio)):
                if self.basis[i] < self.basis[best]:
                    best = i
        return best

    def run(self, tol: float, allowed: int, budget: int):
        """Pivot until optimal; returns (status, pivots used)."""
        used = 0
        while True:
            col = self.entering(tol, allowed)
            if col is None:
                return "optimal", used
            if used >= budget:
                return "iteration_limit", used
            row = self.leaving(col)
            if row is None:
                return "unbounded", used
            self.pivot(row, col)
            used += 1


def _standard_form(prog: LinearProgram):
    """Equality form ``A_std y = b_std, y >= 0`` plus the map back to ``x``."""
    a, b, c = prog.ineq_matrix, prog.ineq_rhs, prog.objective
    m, n = a.shape
    cols, costs, back = [], [], []
    for j, kind in enumerate(prog.var_kinds):
        cols.append(a[:, j])
        costs.append(c[j])
        back.append((j, 1.0))
        if kind == "free":
            cols.append(-a[:, j])
            costs.append(-c[j])
            back.append((j, -1.0))
    n_struct = len(cols)
    a_std = np.column_stack(cols + [np.eye(m)[:, i] for i in range(m)]) if m else np.zeros((0, n_struct))
    c_std = np.concatenate([np.array(costs), np.zeros(m)])
    return a_std, b.copy(), c_std, back, n_struct


def _extract(prog, y, back):
    x = np.zeros(prog.objective.shape[0])
    for k, (j, sign) in enumerate(back):
        x[j] += sign * y[k]
    return x


def solve_lp(prog: LinearProgram, options: LpOptions | None = None) -> LpSolution:
    """Solve ``prog`` by two-phase simplex with Bland's rule.

    A result with ``status == "optimal"`` has passed a certificate check:
    primal feasibility within ``feasibility_tol`` and non-negative reduced
    costs (dual feasibility) within ``optimality_tol`` for the recomputed
    basis, which together with complementary slackness of the basic solution
    proves optimality.
    """
    opts = options or LpOptions()
    a_std, b_std, c_std, back, n_struct = _standard_form(prog)
    m, n_std = a_std.shape
    scale = max(1.0, float(np.max(np.abs(b_std), initial=0.0)))

    if m == 0:
        # only sign constraints: optimal at zero unless some direction is free-descending
        if np.any(c_std[:n_struct] < -opts.optimality_tol):
            return LpSolution(np.zeros(prog.objective.shape[0]), -np.inf, "unbounded", 0)
        return LpSolution(np.zeros(prog.objective.shape[0]), 0.0, "optimal", 0)

    flip = b_std < 0
    body = a_std.copy()
    rhs = b_std.copy()
    body[flip] *= -1.0
    rhs[flip] *= -1.0
    need_art = np.flatnonzero(flip)
    n_art = need_art.shape[0]
    art = np.zeros((m, n_art))
    art[need_art, np.arange(n_art)] = 1.0
    body = np.hstack([body, art])
    basis = [n_struct + i for i in range(m)]
    for k, i in enumerate(need_art):
        basis[i] = n_std + k

    trace_path = os.environ.get(TRACE_ENV)
    trace = open(trace_path, "a") if trace_path else None
    try:
        tab = _Tableau(body, rhs, basis, trace)
        iterations = 0

        # phase 1: drive artificials to zero
        if n_art:
            phase1 = np.concatenate([np.zeros(n_std), np.ones(n_art)])
            tab.set_costs(phase1)
            status, used = tab.run(opts.optimality_tol, n_std + n_art, opts.max_iterations)
            iterations += used
            if status == "iteration_limit":
                y = _basic_values(tab, n_std + n_art)[:n_std]
                x = _extract(prog, y, back)
                return LpSolution(x, float(prog.objective @ x), "iteration_limit", iterations)
            infeas = float(phase1[tab.basis] @ tab.rhs)
            if infeas > opts.feasibility_tol * scale:
                log.debug("phase 1 ended with infeasibility %.3e", infeas)
                return LpSolution(np.full(prog.objective.shape[0], np.nan), np.nan, "infeasible", iterations)
            _evict_artificials(tab, n_std)
            tab.body = tab.body[:, :n_std]

        # phase 2
        tab.set_costs(c_std)
        status, used = tab.run(opts.optimality_tol, n_std, opts.max_iterations - iterations)
        iterations += used
        y = _basic_values(tab, n_std)
        if status == "unbounded":
            return LpSolution(_extract(prog, y, back), -np.inf, "unbounded", iterations)
        if status == "iteration_limit":
            x = _extract(prog, y, back)
            return LpSolution(x, float(prog.objective @ x), "iteration_limit", iterations)

        y = _refine(a_std, b_std, tab, y)
        _certify(a_std, b_std, c_std, tab, y, opts, scale)
        x = _extract(prog, y, back)
        resid = prog.ineq_matrix @ x - prog.ineq_rhs
        if resid.size and resid.max() > opts.feasibility_tol * scale:
            raise LpCertificateError(f"optimal point violates constraints by {resid.max():.3e}")
        return LpSolution(x, float(prog.objective @ x), "optimal", iterations)
    finally:
        if trace is not None:
            trace.close()


def _basic_values(tab: _Tableau, width: int) -> np.ndarray:
    y = np.zeros(width)
    for i, j in enumerate(tab.basis):
        if j < width:
            y[j] = tab.rhs[i]
    return y


def _evict_artificials(tab: _Tableau, n_std: int):
    """Pivot zero-valued artificials out of the basis; drop redundant rows."""
    keep = []
    for i in range(len(tab.basis)):
        if tab.basis[i] < n_std:
            keep.append(i)
            continue
        row = tab.body[i, :n_std]
        candidates = np.flatnonzero(np.abs(row) > _PIVOT_TOL)
        if candidates.size:
            tab.pivot(i, int(candidates[0]))
            keep.append(i)
    if len(keep) < len(tab.basis):
        tab.body = tab.body[keep]
        tab.rhs = tab.rhs[keep]
        tab.basis = [tab.basis[i] for i in keep]


def _refine(a_std, b_std, tab: _Tableau, y_tab: np.ndarray) -> np.ndarray:
    # recompute basic values from the original data instead of the pivoted tableau
    cols = tab.basis
    basis_mat = a_std[:, cols]
    try:
        yb, *_ = np.linalg.lstsq(basis_mat, b_std, rcond=None)
    except np.linalg.LinAlgError:
        return y_tab
    y = np.zeros_like(y_tab)
    y[cols] = yb
    y = np.maximum(y, 0.0)
    if np.max(np.abs(a_std @ y - b_std)) <= np.max(np.abs(a_std @ y_tab - b_std)):
        return y
    return y_tab


def _certify(a_std, b_std, c_std, tab, y, opts: LpOptions, scale: float):
    primal = np.max(np.abs(a_std @ y - b_std))
    if primal > opts.feasibility_tol * scale or np.min(y) < -opts.feasibility_tol:
        raise LpCertificateError(f"basic solution is infeasible (residual {primal:.3e})")
    basis_mat = a_std[:, tab.basis]
    duals, *_ = np.linalg.lstsq(basis_mat.T, c_std[tab.basis], rcond=None)
    reduced = c_std - a_std.T @ duals
    cscale = max(1.0, float(np.max(np.abs(c_std))))
    if np.min(reduced) < -1e3 * opts.optimality_tol * cscale:
        raise LpCertificateError(f"negative reduced cost {np.min(reduced):.3e} at reported optimum")
    gap = abs(float(c_std @ y - b_std @ duals))
    if gap > 1e3 * opts.optimality_tol * cscale * scale * max(1, len(y)) ** 0.5:
        raise LpCertificateError(f"duality gap {gap:.3e} at reported optimum")
