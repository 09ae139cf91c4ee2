"""Conservation-constrained regression followed by nullspace L1 sparsification.

The pipeline vectorizes ``Y = Phi W`` column-wise (``W`` stacked one state
variable after another, so entry ``(i, j)`` sits at ``i + j * sigma``), finds
the minimum-norm least-squares ``W`` with zero row sums, and then minimizes
the 1-norm of ``W + xi`` over corrections ``xi`` that lie in the nullspace of
the block design matrix and keep the row sums at zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .derivatives import derivatives
from .dictionary import PolyDictionary, eval_design
from .lp import LinearProgram, LpOptions, Status, solve_lp
from .simulate import ModelSpec, Trajectory

log = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-8
CONSTRAINT_TOL = 1e-8


class ConstraintViolationError(RuntimeError):
    pass


class SparsificationError(RuntimeError):
    def __init__(self, status: str):
        super().__init__(f"L1 sparsification LP ended with status {status!r}")
        self.status = status


@dataclass(frozen=True)
class IdentificationProblem:
    design: np.ndarray
    targets: np.ndarray
    constraint: np.ndarray
    dictionary: PolyDictionary

    def __post_init__(self):
        if self.design.shape[0] != self.targets.shape[0]:
            raise ValueError("design and targets must have the same number of rows")
        if self.design.shape[1] != len(self.dictionary):
            raise ValueError("design columns must match the dictionary size")
        if self.targets.shape[1] != self.dictionary.num_vars:
            raise ValueError("targets must have one column per state variable")

    @property
    def sigma(self) -> int:
        return self.design.shape[1]

    @property
    def num_vars(self) -> int:
        return self.targets.shape[1]


@dataclass(frozen=True)
class CandidateSolution:
    w_vec: np.ndarray
    residual_norm: float
    max_row_sum_violation: float


@dataclass(frozen=True)
class NullspaceBasis:
    columns: np.ndarray
    tolerance: float

    @property
    def dim(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class SparsifiedSolution:
    w_vec: np.ndarray
    z: np.ndarray
    l1_norm: float
    lp_status: Status
    lp_iterations: int = 0


@dataclass(frozen=True)
class IdentifyOptions:
    rank_tol: float = DEFAULT_RANK_TOL
    lp: LpOptions = field(default_factory=LpOptions)
    compress_basis: bool = True


def build_constraint_matrix(sigma: int, num_vars: int) -> np.ndarray:
    """Row ``i`` sums the coefficients of dictionary term ``i`` over all states."""
    if sigma < 1 or num_vars < 1:
        raise ValueError("sigma and num_vars must be positive")
    return np.tile(np.eye(sigma), (1, num_vars))


def vectorize(design, targets):
    """Block-diagonal design ``kron(I_M, Phi)`` and column-stacked targets."""
    phi = np.asarray(design, dtype=float)
    y = np.asarray(targets, dtype=float)
    if phi.shape[0] != y.shape[0]:
        raise ValueError("design and targets must have the same number of rows")
    block = np.kron(np.eye(y.shape[1]), phi)
    return block, y.reshape(-1, order="F")


def devectorize(w_vec, sigma: int, num_vars: int) -> np.ndarray:
    return np.asarray(w_vec, dtype=float).reshape((sigma, num_vars), order="F")


def assemble_problem(dictionary: PolyDictionary, states, targets) -> IdentificationProblem:
    design = eval_design(dictionary, states).values
    targets = np.asarray(targets, dtype=float)
    return IdentificationProblem(
        design=np.asarray(design),
        targets=targets,
        constraint=build_constraint_matrix(len(dictionary), dictionary.num_vars),
        dictionary=dictionary,
    )


def nullspace(matrix, rel_tol: float = DEFAULT_RANK_TOL) -> NullspaceBasis:
    """Orthonormal basis of right singular vectors with ``s <= rel_tol * s_max``.

    Directions beyond ``min(m, n)`` have singular value zero and are always
    included. An all-zero matrix has the full space as its nullspace.
    """
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    m, n = a.shape
    if m == 0:
        return NullspaceBasis(np.eye(n), rel_tol)
    _, s, vt = np.linalg.svd(a, full_matrices=m < n)
    cutoff = rel_tol * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff)) if s.size and s[0] > 0 else 0
    return NullspaceBasis(vt[rank:].T.copy(), rel_tol)


def _min_norm_lstsq(a, b, rel_tol):
    """Minimum-norm least squares via a truncated SVD."""
    if a.shape[1] == 0:
        return np.zeros(0)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(a.shape[1])
    keep = s > rel_tol * s[0]
    coef = (u[:, keep].T @ b) / s[keep]
    return vt[keep].T @ coef


def constrained_least_squares(
    problem: IdentificationProblem, rank_tol: float = DEFAULT_RANK_TOL
) -> CandidateSolution:
    """Minimum-norm minimizer of ``||Y - Phi W||`` over zero-row-sum ``W``.

    Uses the nullspace method: ``w = N_C u`` with ``N_C`` an orthonormal basis
    of the constraint nullspace, so the constraint holds by construction and
    the minimum-norm ``u`` gives the minimum-norm ``w``.
    """
    block, y_vec = vectorize(problem.design, problem.targets)
    n_c = nullspace(problem.constraint, rank_tol).columns
    u = _min_norm_lstsq(block @ n_c, y_vec, rank_tol)
    w = n_c @ u
    viol = float(np.max(np.abs(problem.constraint @ w), initial=0.0))
    if viol > CONSTRAINT_TOL:
        raise ConstraintViolationError(f"candidate violates conservation by {viol:.3e}")
    resid = float(np.linalg.norm(y_vec - block @ w))
    return CandidateSolution(w, resid, viol)


def build_projected_basis(null_design: NullspaceBasis, null_constraint: NullspaceBasis) -> np.ndarray:
    """``B = N_design (N_design^T N_constraint)``: constraint nullspace projected onto the design nullspace."""
    nd, nc = null_design.columns, null_constraint.columns
    if nd.shape[0] != nc.shape[0]:
        raise ValueError("nullspace bases live in different spaces")
    return nd @ (nd.T @ nc)


def sparsify(
    candidate: CandidateSolution,
    basis_b,
    lp_options: LpOptions | None = None,
    rank_tol: float = DEFAULT_RANK_TOL,
    compress_basis: bool = True,
) -> SparsifiedSolution:
    """Minimize ``||w + B z||_1`` over free ``z`` with the slack LP.

    The LP has variables ``(z, s)``, objective ``sum(s)`` and constraints
    ``B z - s <= -w`` and ``-B z - s <= w``. With ``compress_basis`` the LP
    runs over an orthonormal basis ``Q`` of ``range(B)`` instead of ``B``; the
    feasible set of ``w + B z`` is identical, but round-off directions of
    ``B`` (singular values near zero) cannot be amplified by huge ``z``.
    The reported ``z`` is the minimum-norm solution of ``B z = Q y``.
    """
    w0 = np.asarray(candidate.w_vec, dtype=float)
    b = np.asarray(basis_b, dtype=float).reshape(w0.shape[0], -1)
    n = w0.shape[0]
    l1_0 = float(np.sum(np.abs(w0)))
    if b.shape[1] == 0:
        return SparsifiedSolution(w0.copy(), np.zeros(0), l1_0, "optimal")

    if compress_basis:
        u, s, _ = np.linalg.svd(b, full_matrices=False)
        r = int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0
        q = u[:, :r]
    else:
        q = b
    if q.shape[1] == 0:
        return SparsifiedSolution(w0.copy(), np.zeros(b.shape[1]), l1_0, "optimal")

    p = q.shape[1]
    eye = np.eye(n)
    a_ub = np.block([[q, -eye], [-q, -eye]])
    b_ub = np.concatenate([-w0, w0])
    c = np.concatenate([np.zeros(p), np.ones(n)])
    kinds = ("free",) * p + ("non_negative",) * n
    sol = solve_lp(LinearProgram(c, a_ub, b_ub, kinds), lp_options)
    log.debug("sparsify LP: status=%s iterations=%d", sol.status, sol.iterations)
    if sol.status != "optimal":
        return SparsifiedSolution(w0.copy(), np.zeros(b.shape[1]), l1_0, sol.status, sol.iterations)

    y = sol.x[:p]
    correction = q @ y
    w = w0 + correction
    l1 = float(np.sum(np.abs(w)))
    if l1 > l1_0 + 1e-9:
        # z = 0 is feasible, so a worse point can only be round-off
        return SparsifiedSolution(w0.copy(), np.zeros(b.shape[1]), l1_0, "optimal", sol.iterations)
    z = y if not compress_basis else _min_norm_lstsq(b, correction, rank_tol)
    return SparsifiedSolution(w, z, l1, "optimal", sol.iterations)


@dataclass(frozen=True)
class IdentificationResult:
    model: ModelSpec
    sparse: SparsifiedSolution
    candidate: CandidateSolution
    problem: IdentificationProblem
    design_nullity: int
    constraint_nullity: int

    def __iter__(self):
        # unpacks as (model, sparsified, candidate)
        return iter((self.model, self.sparse, self.candidate))


def identify_model(
    traj: Trajectory,
    dictionary: PolyDictionary,
    derivative_method: str = "exact",
    options: IdentifyOptions | None = None,
    truth: ModelSpec | None = None,
    name: str = "identified",
) -> IdentificationResult:
    """Run the full identification pipeline on one trajectory.

    ``truth`` is only consulted for ``derivative_method="exact"``, where the
    regression targets are the true right-hand side at the sampled states.
    Raises :class:`SparsificationError` if the LP does not reach optimality.
    """
    opts = options or IdentifyOptions()
    if traj.num_vars != dictionary.num_vars:
        raise ValueError("trajectory and dictionary have different state dimensions")
    deriv = derivatives(traj, derivative_method, truth)
    states = traj.states[deriv.aligned_rows]
    problem = assemble_problem(dictionary, states, deriv.values)
    candidate = constrained_least_squares(problem, opts.rank_tol)

    block, _ = vectorize(problem.design, problem.targets)
    null_design = nullspace(block, opts.rank_tol)
    null_constraint = nullspace(problem.constraint, opts.rank_tol)
    b = build_projected_basis(null_design, null_constraint)
    sparse = sparsify(candidate, b, opts.lp, opts.rank_tol, opts.compress_basis)
    if sparse.lp_status != "optimal":
        raise SparsificationError(sparse.lp_status)

    sigma, m = len(dictionary), dictionary.num_vars
    names = truth.compartments if truth is not None else ()
    model = ModelSpec(dictionary, devectorize(sparse.w_vec, sigma, m), name=name, compartments=names)
    return IdentificationResult(
        model, sparse, candidate, problem, null_design.dim, null_constraint.dim
    )
