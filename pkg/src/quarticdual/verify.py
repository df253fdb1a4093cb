"""Independent certificates for computed solutions and small global oracles.

The oracles share no code with the interior-point solver: they run seeded
multi-start local minimization (``scipy.optimize``) on the primal objective,
plus a dense grid pass in dimensions up to three.
"""
import csv
import itertools
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from .conjugate import fenchel_residual
from .exceptions import DomainError
from .problems import QpInstance, QqInstance, bordered, f_qp, f_qq
from .symlin import eig_sym, min_eigenvalue

__all__ = [
    "Certificate",
    "gap",
    "dual_kkt_qq",
    "dual_kkt_residual_qq",
    "recover_x",
    "oracle_qp",
    "oracle_qq",
    "certify_qp",
    "certify_qq",
    "certify",
    "CERTIFICATE_COLUMNS",
    "write_certificates_csv",
]

GRID_MAX_N = 3
GRID_POINTS = {1: 4001, 2: 401, 3: 61}


@dataclass
class Certificate:
    """Residuals measuring how close ``(x, sigma[, lam])`` is to optimal.

    ``primal_feasibility``, ``complementarity`` and ``dual_kkt_sq_norm`` are
    zero for the unconstrained problem.
    """

    gap: float
    fenchel_residual: float
    gamma_norm: float
    primal_feasibility: float = 0.0
    complementarity: float = 0.0
    dual_cone_margin: float = 0.0
    dual_kkt_sq_norm: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not np.isfinite(value):
                raise ValueError(f"certificate field {name} is not finite: {value!r}")

    def as_dict(self):
        return asdict(self)


CERTIFICATE_COLUMNS = tuple(Certificate.__dataclass_fields__)


def gap(q1, x, sigma):
    """Duality gap ``q1(x)**2 - sigma**2 / 4``."""
    y = q1(x)
    return y * y - 0.25 * sigma * sigma


def _lift(x):
    return np.append(np.asarray(x, dtype=float), 1.0)


def dual_kkt_residual_qq(inst, x, lam, sigma):
    """Residual vector of the dual KKT system at the rank-one multiplier
    ``Z = (x; 1)(x; 1)'``.

    Entries: stationarity in ``sigma``, complementarity ``tr(M Z)``, the
    hinge of the least eigenvalue of the LMI block, and the hinge of ``lam``.
    ``gamma`` is set by the complementarity identity
    ``gamma = 2 q1(x)**2 + lam q2(x)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (inst.n,):
        raise ValueError(f"x has length {x.size}, expected {inst.n}")
    z = _lift(x)
    M1 = bordered(inst.q1)
    M2 = bordered(inst.q2)
    q1x = float(z @ M1 @ z)
    q2x = float(z @ M2 @ z)
    gamma = 2.0 * q1x * q1x + lam * q2x
    M = sigma * M1 + lam * M2
    M[-1, -1] -= gamma
    return np.array([
        2.0 * q1x - sigma,
        float(z @ M @ z),
        min(0.0, min_eigenvalue(M)),
        min(0.0, lam),
    ])


def dual_kkt_qq(inst, x, lam, sigma):
    """Squared norm of :func:`dual_kkt_residual_qq`."""
    r = dual_kkt_residual_qq(inst, x, lam, sigma)
    return float(r @ r)


def recover_x(Z, rank_tol=1e-4, psd_tol=1e-8):
    """Extract ``x`` from a multiplier matrix that is numerically rank one.

    Returns ``(x, ok)``. ``ok`` is false when the top eigenvalue carries
    less than ``1 - rank_tol`` of the trace or when the last entry of the top
    eigenvector vanishes (then ``x`` is ``None``).
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1] or Z.shape[0] < 2:
        raise ValueError(f"Z must be square with size >= 2, got {Z.shape}")
    Z = 0.5 * (Z + Z.T)
    if abs(Z[-1, -1] - 1.0) > 1e-6:
        raise DomainError(f"Z[n+1, n+1] must equal 1, got {Z[-1, -1]!r}")
    values, vectors = eig_sym(Z)
    if values[0] < -psd_tol * (1.0 + np.linalg.norm(Z)):
        raise DomainError(f"Z is not positive semidefinite (min eigenvalue {values[0]:.3e})")
    top, v = values[-1], vectors[:, -1]
    if abs(v[-1]) <= 1e-8:
        return None, False
    x = v[:-1] / v[-1]
    ok = bool(top >= (1.0 - rank_tol) * np.trace(Z))
    return x, ok


# -- global oracles -----------------------------------------------------------


def _box_radius(forms):
    """Half-width of the start box, from the size of the linear and constant
    terms relative to the quadratic part."""
    r = 1.0
    for q in forms:
        scale = max(np.max(np.abs(np.linalg.eigvalsh(q.A))), 1e-3)
        r = max(r, (np.linalg.norm(q.b) + np.sqrt(abs(q.c))) / np.sqrt(scale))
    return 3.0 * r


def _grid(n, radius):
    k = GRID_POINTS[n]
    axis = np.linspace(-radius, radius, k)
    return np.array(list(itertools.product(axis, repeat=n)))


def _batch_q(q, X):
    return np.einsum("ij,jk,ik->i", X, q.A, X) + 2.0 * X @ q.b + q.c


def _qp_fun(inst):
    q0, q1 = inst.q0, inst.q1

    def fun(x):
        y = q1(x)
        return q0(x) + y * y, q0.gradient(x) + 2.0 * y * q1.gradient(x)

    return fun


def oracle_qp(inst, budget=200, seed=0, gtol=1e-10):
    """Best value of ``q0 + q1**2`` over seeded multi-start L-BFGS runs.

    Returns ``(f_best, x_best)``.
    """
    if not isinstance(inst, QpInstance):
        raise TypeError("oracle_qp expects a QpInstance")
    n = inst.n
    rng = np.random.default_rng(seed)
    radius = _box_radius([inst.q0, inst.q1])
    starts = list(rng.uniform(-radius, radius, size=(budget, n)))
    if n <= GRID_MAX_N:
        X = _grid(n, radius)
        vals = _batch_q(inst.q0, X) + _batch_q(inst.q1, X) ** 2
        starts.extend(X[np.argsort(vals)[:10]])
    fun = _qp_fun(inst)
    best_f, best_x = np.inf, None
    for x0 in starts:
        res = optimize.minimize(
            fun, x0, jac=True, method="L-BFGS-B",
            options={"gtol": gtol, "ftol": 1e-15, "maxiter": 2000},
        )
        f = f_qp(inst, res.x)
        if f < best_f:
            best_f, best_x = f, res.x
    return float(best_f), best_x


def _feasible_starts(inst, rng, budget, radius):
    starts = []
    for _ in range(50):
        X = rng.uniform(-radius, radius, size=(4 * budget, inst.n))
        X = X[_batch_q(inst.q2, X) <= 0.0]
        starts.extend(X[: budget - len(starts)])
        if len(starts) >= budget:
            break
        radius *= 1.5
    return starts


def oracle_qq(inst, budget=200, seed=0, feas_tol=1e-9):
    """Best value of ``q1**2`` on ``{q2 <= 0}`` over seeded feasible
    multi-start SLSQP runs.

    An SLSQP result is kept only if ``q2 <= feas_tol``; otherwise its feasible
    start point competes instead. The returned point always satisfies the
    constraint to ``feas_tol``.
    """
    if not isinstance(inst, QqInstance):
        raise TypeError("oracle_qq expects a QqInstance")
    n = inst.n
    q1, q2 = inst.q1, inst.q2
    rng = np.random.default_rng(seed)
    radius = _box_radius([q1, q2])
    starts = _feasible_starts(inst, rng, budget, radius)
    if inst.slater_point is not None:
        starts.append(np.array(inst.slater_point))
    if n <= GRID_MAX_N:
        X = _grid(n, radius)
        feas = _batch_q(q2, X) <= 0.0
        X = X[feas]
        if len(X):
            vals = _batch_q(q1, X) ** 2
            starts.extend(X[np.argsort(vals)[:10]])
    if not starts:
        raise DomainError("no feasible start point found for the constrained oracle")

    def fun(x):
        y = q1(x)
        return y * y, 2.0 * y * q1.gradient(x)

    cons = {"type": "ineq", "fun": lambda x: -q2(x), "jac": lambda x: -q2.gradient(x)}
    best_f, best_x = np.inf, None
    for x0 in starts:
        candidates = [np.asarray(x0, dtype=float)]
        res = optimize.minimize(
            fun, x0, jac=True, method="SLSQP", constraints=[cons],
            options={"ftol": 1e-16, "maxiter": 500},
        )
        if np.all(np.isfinite(res.x)):
            candidates.append(res.x)
        for x in candidates:
            if q2(x) <= feas_tol:
                f = f_qq(inst, x)
                if f < best_f:
                    best_f, best_x = f, x
    return float(best_f), best_x


# -- certificates -------------------------------------------------------------


def certify_qp(inst, x, sigma):
    from .solver import gamma_qp

    q0, q1 = inst.q0, inst.q1
    return Certificate(
        gap=gap(q1, x, sigma),
        fenchel_residual=fenchel_residual("square", q1(x), sigma),
        gamma_norm=float(np.linalg.norm(gamma_qp(inst, x, sigma))),
        dual_cone_margin=min_eigenvalue(q0.A + sigma * q1.A),
    )


def certify_qq(inst, x, lam, sigma):
    from .solver import gamma_qq

    q1, q2 = inst.q1, inst.q2
    q2x = q2(x)
    return Certificate(
        gap=gap(q1, x, sigma),
        fenchel_residual=fenchel_residual("square", q1(x), sigma),
        gamma_norm=float(np.linalg.norm(gamma_qq(inst, x, lam, sigma))),
        primal_feasibility=max(q2x, 0.0),
        complementarity=abs(lam * q2x),
        dual_cone_margin=min_eigenvalue(sigma * q1.A + lam * q2.A),
        dual_kkt_sq_norm=dual_kkt_qq(inst, x, lam, sigma),
    )


def certify(inst, state):
    """Certificate for a solver state of either problem class."""
    if isinstance(inst, QpInstance):
        return certify_qp(inst, state.x, state.sigma)
    if isinstance(inst, QqInstance):
        return certify_qq(inst, state.x, state.lam, state.sigma)
    raise TypeError(f"not a problem instance: {type(inst).__name__}")


def write_certificates_csv(rows, path_or_file, extra_columns=()):
    """Write one CSV row per certificate.

    ``rows`` yields ``(extra, certificate)`` pairs where ``extra`` maps the
    names in ``extra_columns`` to values.
    """
    header = list(extra_columns) + list(CERTIFICATE_COLUMNS)

    def _write(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        for extra, cert in rows:
            d = cert.as_dict()
            writer.writerow([extra[c] for c in extra_columns] + [repr(d[c]) for c in CERTIFICATE_COLUMNS])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)
