"""Potential-reduction primal-dual interior-point solver.

Both quartic problems are recast as constrained equations ``H(z) = 0`` over
a product of cones and solved by damped Newton steps on the potential

    p(z) = rho * log ||H(z)||^2 - log det((WU + UW) / 2) [- log(lam * w)]

with a non-monotone Armijo line search. The Newton system is reduced to an
n x n linear solve for ``dx`` followed by back-substitution and a Lyapunov
solve for ``dU``.

Vectorization is row-major (``M.ravel()``). The unknown ``z`` is laid out as
``[x, sigma, vec U, vec W]`` for the unconstrained problem and
``[x, lam, sigma, w, vec U, vec W]`` for the constrained one.
"""
import csv
import enum
import time
import warnings
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .conjugate import fenchel_residual
from .exceptions import DomainError, SingularSystemError
from .problems import QpInstance, QqInstance
from .symlin import lyapunov_solve, max_step_to_boundary, min_eigenvalue

__all__ = [
    "SolverConfig",
    "QpState",
    "QqState",
    "SolveStatus",
    "SolveReport",
    "gamma_qp",
    "h_qp",
    "jacobian_qp",
    "jvp_qp",
    "newton_rhs_qp",
    "newton_direction_qp",
    "potential_qp",
    "potential_directional_derivative_qp",
    "initial_state_qp",
    "solve_qp",
    "gamma_qq",
    "h_qq",
    "jacobian_qq",
    "jvp_qq",
    "newton_rhs_qq",
    "newton_direction_qq",
    "potential_qq",
    "potential_directional_derivative_qq",
    "initial_state_qq",
    "solve_qq",
    "write_trace_csv",
    "TRACE_COLUMNS",
]


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the interior-point iteration.

    ``rho`` and ``memory`` default to ``2(n+1)`` / 5 for the unconstrained
    problem and ``2(n+3)`` / 10 for the constrained one.

    ``centering`` selects the vector the Newton right-hand side is bent
    along: ``"identity"`` uses vec(I) on the complementarity block (plus the
    scalar ``lam * w`` entry for the constrained problem), ``"ones"`` uses
    the all-ones vector on that block.

    ``complementarity_tol`` applies to the constrained problem only: besides
    ``||Gamma|| <= epsilon`` the iteration also requires
    ``|q2(x) + w| <= tol`` and ``lam * w <= tol`` before it stops.
    """

    epsilon: float = 1e-4
    eta: float = 1e-6
    rho: float = None
    memory: int = None
    beta: float = 0.2
    max_iter: int = 500
    tau_boundary: float = 0.95
    alpha_min: float = 1e-12
    split_steps: bool = True
    centering: str = "identity"
    complementarity_tol: float = 1e-9
    keep_trace: bool = False

    def resolved(self, n, problem):
        rho = self.rho
        if rho is None:
            rho = 2.0 * (n + 1) if problem == "qp" else 2.0 * (n + 3)
        memory = self.memory
        if memory is None:
            memory = 5 if problem == "qp" else 10
        cfg = replace(self, rho=float(rho), memory=int(memory))
        cfg.validate(n)
        return cfg

    def validate(self, n):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if self.rho is not None and not self.rho > n + 1:
            raise ValueError(f"rho must exceed n + 1 = {n + 1}")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if not 0 < self.tau_boundary < 1:
            raise ValueError("tau_boundary must lie in (0, 1)")
        if self.memory is not None and self.memory < 0:
            raise ValueError("memory must be nonnegative")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if self.centering not in ("identity", "ones"):
            raise ValueError("centering must be 'identity' or 'ones'")


@dataclass
class QpState:
    x: np.ndarray
    sigma: float
    U: np.ndarray
    W: np.ndarray

    def copy(self):
        return QpState(self.x.copy(), float(self.sigma), self.U.copy(), self.W.copy())

    def to_vector(self):
        return np.concatenate([self.x, [self.sigma], self.U.ravel(), self.W.ravel()])

    @classmethod
    def from_vector(cls, z, n):
        nn = n * n
        return cls(
            z[:n].copy(), float(z[n]),
            z[n + 1:n + 1 + nn].reshape(n, n).copy(),
            z[n + 1 + nn:].reshape(n, n).copy(),
        )


@dataclass
class QqState:
    x: np.ndarray
    lam: float
    sigma: float
    w: float
    U: np.ndarray
    W: np.ndarray

    def copy(self):
        return QqState(
            self.x.copy(), float(self.lam), float(self.sigma), float(self.w),
            self.U.copy(), self.W.copy(),
        )

    def to_vector(self):
        return np.concatenate(
            [self.x, [self.lam, self.sigma, self.w], self.U.ravel(), self.W.ravel()]
        )

    @classmethod
    def from_vector(cls, z, n):
        nn = n * n
        return cls(
            z[:n].copy(), float(z[n]), float(z[n + 1]), float(z[n + 2]),
            z[n + 3:n + 3 + nn].reshape(n, n).copy(),
            z[n + 3 + nn:].reshape(n, n).copy(),
        )


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    LINE_SEARCH_STALL = "line_search_stall"
    SINGULAR_SYSTEM = "singular_system"


TRACE_COLUMNS = (
    "iter", "alpha_primal", "alpha_dual", "norm_H", "norm_Gamma", "potential", "gap",
)


@dataclass
class SolveReport:
    status: SolveStatus
    iterations: int
    final_gamma_norm: float
    gap: float
    fenchel_residual: float
    wall_time: float
    dual_residual_norm: float
    complementarity_norm: float
    objective: float
    message: str = ""
    trace: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status is SolveStatus.CONVERGED

    def as_dict(self):
        out = {
            "status": self.status.value,
            "iterations": self.iterations,
            "final_gamma_norm": self.final_gamma_norm,
            "gap": self.gap,
            "fenchel_residual": self.fenchel_residual,
            "wall_time": self.wall_time,
            "dual_residual_norm": self.dual_residual_norm,
            "complementarity_norm": self.complementarity_norm,
            "objective": self.objective,
        }
        if self.message:
            out["message"] = self.message
        return out


def write_trace_csv(report, path_or_file):
    """Write the per-iteration trace of ``report`` as CSV."""
    def _write(fh):
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in report.trace:
            writer.writerow([row[c] for c in TRACE_COLUMNS])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)


def _sym(M):
    return 0.5 * (M + M.T)


def _jordan(W, U):
    return 0.5 * (W @ U + U @ W)


def _kron_sum(M):
    """Matrix of ``E -> (M E + E M) / 2`` acting on row-major vec(E)."""
    eye = np.eye(M.shape[0])
    return 0.5 * (np.kron(M, eye) + np.kron(eye, M.T))


def _centering_vector(n, centering):
    if centering == "identity":
        return np.eye(n).ravel()
    return np.ones(n * n)


# -- unconstrained problem -----------------------------------------------------


def _qp_pencil(inst, sigma):
    q0, q1 = inst.q0, inst.q1
    return q0.A + sigma * q1.A, q0.b + sigma * q1.b


def gamma_qp(inst, x, sigma):
    """Saddle operator ``[grad_x L; -dL/dsigma]`` of the unconstrained problem."""
    M, v = _qp_pencil(inst, sigma)
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"x has length {x.size}, expected {inst.n}")
    out = np.empty(inst.n + 1)
    out[:-1] = 2.0 * (M @ x + v)
    out[-1] = 0.5 * sigma - inst.q1(x)
    return out


def _h_qp_blocks(inst, state):
    M, _ = _qp_pencil(inst, state.sigma)
    return (
        gamma_qp(inst, state.x, state.sigma),
        M - state.W,
        _jordan(state.W, state.U),
    )


def h_qp(inst, state):
    gam, R, S = _h_qp_blocks(inst, state)
    return np.concatenate([gam, R.ravel(), S.ravel()])


def jacobian_qp(inst, state):
    """Dense Jacobian of :func:`h_qp` with respect to ``[x, sigma, vec U, vec W]``."""
    n = inst.n
    nn = n * n
    N = n + 1 + 2 * nn
    M, _ = _qp_pencil(inst, state.sigma)
    g = inst.q1.A @ state.x + inst.q1.b
    J = np.zeros((N, N))
    J[:n, :n] = 2.0 * M
    J[:n, n] = 2.0 * g
    J[n, :n] = -2.0 * g
    J[n, n] = 0.5
    rw = slice(n + 1, n + 1 + nn)
    ru = slice(n + 1 + nn, N)
    cu = slice(n + 1, n + 1 + nn)
    cw = slice(n + 1 + nn, N)
    J[rw, n] = inst.q1.A.ravel()
    J[rw, cw] = -np.eye(nn)
    J[ru, cu] = _kron_sum(state.W)
    J[ru, cw] = _kron_sum(state.U)
    return J


def jvp_qp(inst, state, direction):
    """Jacobian-vector product ``JH(z) d`` without forming the Jacobian."""
    M, _ = _qp_pencil(inst, state.sigma)
    g = inst.q1.A @ state.x + inst.q1.b
    d = direction
    top = 2.0 * (M @ d.x) + 2.0 * g * d.sigma
    srow = -2.0 * g @ d.x + 0.5 * d.sigma
    wblk = inst.q1.A * d.sigma - d.W
    ublk = _jordan(state.W, d.U) + _jordan(d.W, state.U)
    return np.concatenate([top, [srow], wblk.ravel(), ublk.ravel()])


def newton_rhs_qp(inst, state, beta, centering="identity"):
    """``-H + (beta/n) (o'H) o`` with ``o`` supported on the complementarity block."""
    n = inst.n
    H = h_qp(inst, state)
    rhs = -H
    if beta:
        o = _centering_vector(n, centering)
        tail = H[n + 1 + n * n:]
        rhs[n + 1 + n * n:] += (beta / n) * (o @ tail) * o
    return rhs


def newton_direction_qp(inst, state, beta, centering="identity", rhs=None):
    """Newton direction via the n x n reduction and a Lyapunov solve.

    Returns a :class:`QpState` holding ``(dx, dsigma, dU, dW)``.
    """
    n = inst.n
    nn = n * n
    if rhs is None:
        rhs = newton_rhs_qp(inst, state, beta, centering)
    r_x = rhs[:n]
    r_s = rhs[n]
    R_W = rhs[n + 1:n + 1 + nn].reshape(n, n)
    R_U = rhs[n + 1 + nn:].reshape(n, n)

    M, _ = _qp_pencil(inst, state.sigma)
    g = inst.q1.A @ state.x + inst.q1.b
    K = 2.0 * M + 8.0 * np.outer(g, g)
    dx = _solve_reduced(K, r_x - 4.0 * r_s * g)
    ds = 2.0 * r_s + 4.0 * g @ dx
    dW = _sym(inst.q1.A * ds - R_W)
    dU = lyapunov_solve(state.W, 2.0 * _sym(R_U) - (dW @ state.U + state.U @ dW))
    return QpState(dx, float(ds), dU, dW)


def _solve_reduced(K, r):
    try:
        with warnings.catch_warnings():
            # Near-singular K is expected close to degenerate optima; the
            # line search judges the resulting direction.
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            sol = sla.solve(_sym(K), r, assume_a="sym", check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError("reduced Newton system is singular") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("reduced Newton system produced non-finite values")
    return sol


def _logdet_pd(S):
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise DomainError("symmetrized product (WU+UW)/2 is not positive definite") from None
    return 2.0 * np.sum(np.log(np.diag(L))), L


def potential_qp(inst, state, rho=None):
    if rho is None:
        rho = 2.0 * (inst.n + 1)
    H = h_qp(inst, state)
    S = _jordan(state.W, state.U)
    logdet, _ = _logdet_pd(S)
    return rho * np.log(H @ H) - logdet


def _trace_inv_prod(S, dS):
    _, L = _logdet_pd(S)
    return float(np.trace(sla.cho_solve((L, True), dS)))


def potential_directional_derivative_qp(inst, state, direction, rho=None):
    if rho is None:
        rho = 2.0 * (inst.n + 1)
    H = h_qp(inst, state)
    Jd = jvp_qp(inst, state, direction)
    dS = _jordan(state.W, direction.U) + _jordan(direction.W, state.U)
    S = _jordan(state.W, state.U)
    return (2.0 * rho / (H @ H)) * (H @ Jd) - _trace_inv_prod(S, dS)


# -- constrained problem --------------------------------------------------------


def _qq_pencil(inst, lam, sigma):
    q1, q2 = inst.q1, inst.q2
    return sigma * q1.A + lam * q2.A, sigma * q1.b + lam * q2.b


def gamma_qq(inst, x, lam, sigma):
    M, v = _qq_pencil(inst, lam, sigma)
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"x has length {x.size}, expected {inst.n}")
    out = np.empty(inst.n + 1)
    out[:-1] = 2.0 * (M @ x + v)
    out[-1] = 0.5 * sigma - inst.q1(x)
    return out


def h_qq(inst, state):
    """``[Gamma; q2(x) + w; vec(sigma A1 + lam A2 - W); lam w; vec((WU+UW)/2)]``."""
    s = state
    M, _ = _qq_pencil(inst, s.lam, s.sigma)
    return np.concatenate([
        gamma_qq(inst, s.x, s.lam, s.sigma),
        [inst.q2(s.x) + s.w],
        (M - s.W).ravel(),
        [s.lam * s.w],
        _jordan(s.W, s.U).ravel(),
    ])


def _qq_slices(n):
    nn = n * n
    return dict(
        gx=slice(0, n), gs=n, c=n + 1,
        W=slice(n + 2, n + 2 + nn), comp=n + 2 + nn,
        S=slice(n + 3 + nn, n + 3 + 2 * nn),
    )


def jacobian_qq(inst, state):
    """Dense Jacobian of :func:`h_qq` w.r.t. ``[x, lam, sigma, w, vec U, vec W]``."""
    s = state
    n = inst.n
    nn = n * n
    N = n + 3 + 2 * nn
    M, _ = _qq_pencil(inst, s.lam, s.sigma)
    g = inst.q1.A @ s.x + inst.q1.b
    h = inst.q2.A @ s.x + inst.q2.b
    cx, cl, cs, cw = slice(0, n), n, n + 1, n + 2
    cU = slice(n + 3, n + 3 + nn)
    cW = slice(n + 3 + nn, N)
    r = _qq_slices(n)
    J = np.zeros((N, N))
    J[r["gx"], cx] = 2.0 * M
    J[r["gx"], cl] = 2.0 * h
    J[r["gx"], cs] = 2.0 * g
    J[r["gs"], cx] = -2.0 * g
    J[r["gs"], cs] = 0.5
    J[r["c"], cx] = 2.0 * h
    J[r["c"], cw] = 1.0
    J[r["W"], cl] = inst.q2.A.ravel()
    J[r["W"], cs] = inst.q1.A.ravel()
    J[r["W"], cW] = -np.eye(nn)
    J[r["comp"], cl] = s.w
    J[r["comp"], cw] = s.lam
    J[r["S"], cU] = _kron_sum(s.W)
    J[r["S"], cW] = _kron_sum(s.U)
    return J


def jvp_qq(inst, state, direction):
    s, d = state, direction
    M, _ = _qq_pencil(inst, s.lam, s.sigma)
    g = inst.q1.A @ s.x + inst.q1.b
    h = inst.q2.A @ s.x + inst.q2.b
    return np.concatenate([
        2.0 * (M @ d.x) + 2.0 * h * d.lam + 2.0 * g * d.sigma,
        [-2.0 * g @ d.x + 0.5 * d.sigma],
        [2.0 * h @ d.x + d.w],
        (inst.q2.A * d.lam + inst.q1.A * d.sigma - d.W).ravel(),
        [s.w * d.lam + s.lam * d.w],
        (_jordan(s.W, d.U) + _jordan(d.W, s.U)).ravel(),
    ])


def _qq_centering(n, centering):
    o = np.zeros(n + 3 + 2 * n * n)
    r = _qq_slices(n)
    o[r["comp"]] = 1.0
    o[r["S"]] = _centering_vector(n, centering)
    return o


def newton_rhs_qq(inst, state, beta, centering="identity"):
    """``-H + (beta/(n+1)) (o'H) o`` with ``o`` on the ``lam w`` entry and the
    complementarity block."""
    n = inst.n
    H = h_qq(inst, state)
    rhs = -H
    if beta:
        o = _qq_centering(n, centering)
        rhs += (beta / (n + 1)) * (o @ H) * o
    return rhs


def newton_direction_qq(inst, state, beta, centering="identity", rhs=None):
    """Newton direction for the constrained operator via the n x n reduction.

    ``dsigma``, ``dw`` and ``dlam`` are eliminated from the sigma row, the
    constraint row and the ``lam w`` row respectively.
    """
    s = state
    n = inst.n
    if rhs is None:
        rhs = newton_rhs_qq(inst, state, beta, centering)
    r = _qq_slices(n)
    r_x = rhs[r["gx"]]
    r_s = rhs[r["gs"]]
    r_c = rhs[r["c"]]
    R_W = rhs[r["W"]].reshape(n, n)
    r_comp = rhs[r["comp"]]
    R_U = rhs[r["S"]].reshape(n, n)

    M, _ = _qq_pencil(inst, s.lam, s.sigma)
    g = inst.q1.A @ s.x + inst.q1.b
    h = inst.q2.A @ s.x + inst.q2.b
    K = 2.0 * M + 8.0 * np.outer(g, g) + (4.0 * s.lam / s.w) * np.outer(h, h)
    k = r_comp - s.lam * r_c
    dx = _solve_reduced(K, r_x - 4.0 * r_s * g - (2.0 * k / s.w) * h)
    ds = 2.0 * r_s + 4.0 * g @ dx
    dw = r_c - 2.0 * h @ dx
    dl = (k + 2.0 * s.lam * h @ dx) / s.w
    dW = _sym(inst.q1.A * ds + inst.q2.A * dl - R_W)
    dU = lyapunov_solve(s.W, 2.0 * _sym(R_U) - (dW @ s.U + s.U @ dW))
    return QqState(dx, float(dl), float(ds), float(dw), dU, dW)


def potential_qq(inst, state, rho=None):
    if rho is None:
        rho = 2.0 * (inst.n + 3)
    if not (state.lam > 0 and state.w > 0):
        raise DomainError("lam and w must be positive")
    H = h_qq(inst, state)
    logdet, _ = _logdet_pd(_jordan(state.W, state.U))
    return rho * np.log(H @ H) - logdet - np.log(state.lam * state.w)


def potential_directional_derivative_qq(inst, state, direction, rho=None):
    if rho is None:
        rho = 2.0 * (inst.n + 3)
    s, d = state, direction
    H = h_qq(inst, s)
    Jd = jvp_qq(inst, s, d)
    dS = _jordan(s.W, d.U) + _jordan(d.W, s.U)
    S = _jordan(s.W, s.U)
    return (
        (2.0 * rho / (H @ H)) * (H @ Jd)
        - _trace_inv_prod(S, dS)
        - d.lam / s.lam - d.w / s.w
    )


# -- initialization ---------------------------------------------------------


def _pd_shift_multiplier(A_base, A_dir):
    """Smallest ``t`` with ``lmin(A_base + t A_dir) >= 0.1`` via Weyl, for PD ``A_dir``."""
    lmin_dir = min_eigenvalue(A_dir)
    if lmin_dir <= 0:
        return None
    return (max(0.0, -min_eigenvalue(A_base)) + 0.1) / lmin_dir


def initial_state_qp(inst, x0="lagrangian"):
    """Interior starting point with ``sigma`` a shifted witness,
    ``W = A0 + sigma A1 + 0.1 I`` and ``U = I``.

    ``x0="lagrangian"`` starts from the minimizer of ``L(., sigma)``;
    ``x0="zero"`` starts from the origin.
    """
    n = inst.n
    alpha = inst.witness_alpha
    if alpha is None:
        alpha = _pd_shift_multiplier(inst.q0.A, inst.q1.A)
        if alpha is None:
            raise DomainError(
                "cannot build a dual-feasible start: A1 is not positive "
                "definite and the instance has no witness_alpha"
            )
    sigma = float(alpha) + 1.0
    M = inst.q0.A + sigma * inst.q1.A
    if min_eigenvalue(M) < 0.1:
        # A1 not positive definite: stay at the witness and pad W instead.
        sigma = float(alpha)
        M = inst.q0.A + sigma * inst.q1.A
    W = M + 0.1 * np.eye(n)
    if min_eigenvalue(W) <= 0:
        raise DomainError("witness_alpha does not make A0 + alpha A1 PSD")
    if x0 not in ("lagrangian", "zero"):
        raise ValueError("x0 must be 'lagrangian' or 'zero'")
    x = np.zeros(n)
    if x0 == "lagrangian":
        x = -np.linalg.lstsq(M, inst.q0.b + sigma * inst.q1.b, rcond=None)[0]
    return QpState(x, sigma, np.eye(n), W)


def initial_state_qq(inst, x0="lagrangian"):
    """Interior start with ``lam = 1``, ``sigma`` shifting ``sigma A1 + A2``
    to positive definite, ``W`` the pencil plus ``0.1 I`` and ``U = I``.

    ``x0="lagrangian"`` starts from the minimizer of ``L(., lam, sigma)``,
    ``x0="slater"`` from the instance's Slater point. The slack is
    ``w = -q2(x)`` when ``x`` is strictly feasible and 1 otherwise.
    """
    n = inst.n
    lam = 1.0
    t = _pd_shift_multiplier(inst.q2.A, inst.q1.A)
    if t is None:
        raise DomainError("cannot build a dual-feasible start: A1 is not positive definite")
    sigma = t + 1.0
    M = sigma * inst.q1.A + lam * inst.q2.A
    if x0 == "lagrangian":
        x = -np.linalg.solve(M, sigma * inst.q1.b + lam * inst.q2.b)
    elif x0 == "slater":
        if inst.slater_point is None:
            raise DomainError("instance has no slater_point")
        x = np.array(inst.slater_point, dtype=float)
    else:
        raise ValueError("x0 must be 'lagrangian' or 'slater'")
    q2x = inst.q2(x)
    w = -q2x if q2x < 0 else 1.0
    return QqState(x, lam, sigma, w, np.eye(n), M + 0.1 * np.eye(n))


# -- main loop --------------------------------------------------------------


class _QpProblem:
    kind = "qp"

    def __init__(self, inst, cfg):
        self.inst = inst
        self.cfg = cfg

    def gamma(self, s):
        return gamma_qp(self.inst, s.x, s.sigma)

    def converged(self, s):
        return np.linalg.norm(self.gamma(s)) <= self.cfg.epsilon

    def norm_h(self, s):
        return float(np.linalg.norm(h_qp(self.inst, s)))

    def potential(self, s):
        return potential_qp(self.inst, s, self.cfg.rho)

    def direction(self, s):
        return newton_direction_qp(self.inst, s, self.cfg.beta, self.cfg.centering)

    def split(self, d):
        zero = np.zeros_like(d.U)
        primal = QpState(d.x, 0.0, zero, zero)
        dual = QpState(np.zeros_like(d.x), d.sigma, d.U, d.W)
        return primal, dual

    def slope(self, s, d):
        return potential_directional_derivative_qp(self.inst, s, d, self.cfg.rho)

    def boundary_cap(self, s, d):
        """Largest primal and dual steps keeping the cone variables interior."""
        return np.inf, min(max_step_to_boundary(s.U, d.U), max_step_to_boundary(s.W, d.W))

    def step(self, s, d, ap, ad):
        return QpState(s.x + ap * d.x, s.sigma + ad * d.sigma, s.U + ad * d.U, s.W + ad * d.W)

    def admissible(self, s):
        return True

    def accept(self, s):
        pass

    def gap(self, s):
        return self.inst.q1(s.x) ** 2 - 0.25 * s.sigma ** 2

    def objective(self, s):
        return self.inst.q0(s.x) + self.inst.q1(s.x) ** 2

    def dual_residual(self, s):
        M, _ = _qp_pencil(self.inst, s.sigma)
        return float(np.linalg.norm(M - s.W))

    def complementarity(self, s):
        return float(np.linalg.norm(_jordan(s.W, s.U)))


class _QqProblem(_QpProblem):
    kind = "qq"

    def __init__(self, inst, cfg):
        super().__init__(inst, cfg)
        self.feasible = False

    def gamma(self, s):
        return gamma_qq(self.inst, s.x, s.lam, s.sigma)

    def converged(self, s):
        if np.linalg.norm(self.gamma(s)) > self.cfg.epsilon:
            return False
        tol = self.cfg.complementarity_tol
        if tol is None:
            return True
        r = self.inst.q2(s.x) + s.w
        return abs(r) <= tol and s.lam * s.w <= tol

    def norm_h(self, s):
        return float(np.linalg.norm(h_qq(self.inst, s)))

    def potential(self, s):
        return potential_qq(self.inst, s, self.cfg.rho)

    def direction(self, s):
        return newton_direction_qq(self.inst, s, self.cfg.beta, self.cfg.centering)

    def split(self, d):
        # The slack w moves with x: it is the primal constraint surplus.
        zero = np.zeros_like(d.U)
        primal = QqState(d.x, 0.0, 0.0, d.w, zero, zero)
        dual = QqState(np.zeros_like(d.x), d.lam, d.sigma, 0.0, d.U, d.W)
        return primal, dual

    def slope(self, s, d):
        return potential_directional_derivative_qq(self.inst, s, d, self.cfg.rho)

    def boundary_cap(self, s, d):
        _, cap_d = super().boundary_cap(s, d)
        cap_p = -s.w / d.w if d.w < 0 else np.inf
        if d.lam < 0:
            cap_d = min(cap_d, -s.lam / d.lam)
        return cap_p, cap_d

    def step(self, s, d, ap, ad):
        return QqState(
            s.x + ap * d.x, s.lam + ad * d.lam, s.sigma + ad * d.sigma,
            s.w + ap * d.w, s.U + ad * d.U, s.W + ad * d.W,
        )

    def admissible(self, s):
        # Once an iterate is feasible, later iterates stay feasible.
        return not self.feasible or self.inst.q2(s.x) <= 0.0

    def accept(self, s):
        self.feasible = self.feasible or self.inst.q2(s.x) <= 0.0

    def objective(self, s):
        return self.inst.q1(s.x) ** 2

    def dual_residual(self, s):
        M, _ = _qq_pencil(self.inst, s.lam, s.sigma)
        return float(np.linalg.norm(M - s.W))

    def complementarity(self, s):
        return float(np.hypot(np.linalg.norm(_jordan(s.W, s.U)), s.lam * s.w))


def _run(prob, state, cfg):
    t0 = time.perf_counter()
    history = deque(maxlen=cfg.memory + 1)
    trace = []
    status = SolveStatus.MAX_ITER
    message = ""
    it = 0
    p = prob.potential(state)
    prob.accept(state)
    history.append(p)
    while True:
        if prob.converged(state):
            status = SolveStatus.CONVERGED
            break
        if it >= cfg.max_iter:
            break
        try:
            d = prob.direction(state)
        except (SingularSystemError, DomainError) as exc:
            status = SolveStatus.SINGULAR_SYSTEM
            message = str(exc)
            break
        d_primal, d_dual = prob.split(d)
        slope_p = prob.slope(state, d_primal)
        slope_d = prob.slope(state, d_dual)
        cap_p, cap_d = prob.boundary_cap(state, d)
        cap_p = min(1.0, cfg.tau_boundary * cap_p)
        cap_d = min(1.0, cfg.tau_boundary * cap_d)
        if not cfg.split_steps:
            cap_p = cap_d = min(cap_p, cap_d)
        p_max = max(history)
        t = 1.0
        accepted = None
        while t >= cfg.alpha_min:
            ap, ad = min(t, cap_p), min(t, cap_d)
            slope = ap * slope_p + ad * slope_d
            if slope >= 0.0 and ap != ad:
                # Unequal steps lost descent; fall back to a common step.
                ap = ad = min(ap, ad)
                slope = ad * (slope_p + slope_d)
            trial = prob.step(state, d, ap, ad)
            if prob.admissible(trial):
                try:
                    p_trial = prob.potential(trial)
                except DomainError:
                    p_trial = np.inf
                if np.isfinite(p_trial) and p_trial <= p_max + cfg.eta * slope:
                    accepted = (trial, p_trial, ap, ad)
                    break
            t *= 0.5
        if accepted is None:
            status = SolveStatus.LINE_SEARCH_STALL
            message = f"no acceptable step above alpha_min={cfg.alpha_min:g}"
            break
        state, p, ap, ad = accepted
        prob.accept(state)
        history.append(p)
        it += 1
        if cfg.keep_trace:
            trace.append({
                "iter": it, "alpha_primal": ap, "alpha_dual": ad,
                "norm_H": prob.norm_h(state),
                "norm_Gamma": float(np.linalg.norm(prob.gamma(state))),
                "potential": float(p), "gap": prob.gap(state),
            })
    q1x = prob.inst.q1(state.x)
    report = SolveReport(
        status=status,
        iterations=it,
        final_gamma_norm=float(np.linalg.norm(prob.gamma(state))),
        gap=float(prob.gap(state)),
        fenchel_residual=float(fenchel_residual("square", q1x, state.sigma)),
        wall_time=time.perf_counter() - t0,
        dual_residual_norm=prob.dual_residual(state),
        complementarity_norm=prob.complementarity(state),
        objective=float(prob.objective(state)),
        message=message,
        trace=trace,
    )
    return state, report


def _check_init_qp(inst, init):
    n = inst.n
    x = np.array(init.x, dtype=float).ravel()
    if x.shape != (n,) or init.U.shape != (n, n) or init.W.shape != (n, n):
        raise ValueError("initial state has the wrong dimensions")
    return x


def _combine(first, second, key):
    """Return the better of two runs, with the work of both in its report."""
    state, report = min((first, second), key=key)
    report.iterations = first[1].iterations + second[1].iterations
    report.wall_time = first[1].wall_time + second[1].wall_time
    note = "restarted after a non-converged first run"
    report.message = f"{report.message}; {note}" if report.message else note
    return state, report


def solve_qp(inst, config=None, init=None, x0="auto"):
    """Run the interior-point method on an unconstrained quartic instance.

    Returns ``(state, report)``. Non-convergence is reported through
    ``report.status`` rather than raised. Without ``init`` the start comes
    from :func:`initial_state_qp`; ``x0="auto"`` begins at the Lagrangian
    minimizer and, if that run does not converge, restarts from the origin
    and returns the run with the smaller ``||Gamma||``.
    """
    if not isinstance(inst, QpInstance):
        raise TypeError("solve_qp expects a QpInstance")
    cfg = (config or SolverConfig()).resolved(inst.n, "qp")
    if init is not None:
        state = init.copy()
        state.x = _check_init_qp(inst, init)
        return _run(_QpProblem(inst, cfg), state, cfg)
    if x0 != "auto":
        return _run(_QpProblem(inst, cfg), initial_state_qp(inst, x0), cfg)
    run = _run(_QpProblem(inst, cfg), initial_state_qp(inst, "lagrangian"), cfg)
    if run[1].converged:
        return run
    retry = _run(_QpProblem(inst, cfg), initial_state_qp(inst, "zero"), cfg)
    return _combine(run, retry, lambda r: (not r[1].converged, r[1].final_gamma_norm))


def solve_qq(inst, config=None, init=None, x0="auto"):
    """Run the interior-point method on a constrained quartic instance.

    Without ``init`` the run starts from :func:`initial_state_qq`. With
    ``x0="auto"`` it begins at the Lagrangian minimizer; if that run does not
    converge and the instance carries a Slater point, the method restarts from
    the Slater point and the better of the two runs is returned (converged
    first, then primal-feasible, then smaller ``||Gamma||``).
    """
    if not isinstance(inst, QqInstance):
        raise TypeError("solve_qq expects a QqInstance")
    cfg = (config or SolverConfig()).resolved(inst.n, "qq")
    if init is not None:
        state = init.copy()
        state.x = _check_init_qp(inst, init)
        if not (state.lam > 0 and state.w > 0):
            raise DomainError("initial lam and w must be positive")
        return _run(_QqProblem(inst, cfg), state, cfg)
    if x0 != "auto":
        return _run(_QqProblem(inst, cfg), initial_state_qq(inst, x0), cfg)
    run = _run(_QqProblem(inst, cfg), initial_state_qq(inst, "lagrangian"), cfg)
    if run[1].converged or inst.slater_point is None:
        return run
    retry = _run(_QqProblem(inst, cfg), initial_state_qq(inst, "slater"), cfg)
    return _combine(run, retry, lambda r: (
        not r[1].converged, inst.q2(r[0].x) > 0.0, r[1].final_gamma_norm,
    ))
