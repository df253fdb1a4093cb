"""Estimator-style wrapper around the interior-point solver.

``fit`` takes a problem instance rather than a data matrix, so there is no
``predict``. Deriving from ``BaseEstimator`` gives ``get_params`` /
``set_params`` and cloning for parameter sweeps.
"""
from sklearn.base import BaseEstimator

from .problems import QpInstance, QqInstance
from .solver import SolverConfig, solve_qp, solve_qq
from .verify import certify

__all__ = ["QuarticDualSolver", "check_instance"]


def check_instance(inst):
    """Return ``inst`` if it is a problem instance, else raise ``TypeError``."""
    if not isinstance(inst, (QpInstance, QqInstance)):
        raise TypeError(
            f"expected a QpInstance or QqInstance, got {type(inst).__name__}"
        )
    return inst


class QuarticDualSolver(BaseEstimator):
    """Potential-reduction solver with scikit-learn style parameters.

    Parameters mirror :class:`~quarticdual.solver.SolverConfig`; ``None``
    for ``rho`` or ``memory`` selects the problem-dependent default.

    Attributes
    ----------
    x_ : ndarray
        Primal solution.
    sigma_ : float
        Dual variable of the squared term.
    lambda_ : float or None
        Constraint multiplier (constrained problems only).
    state_ : QpState or QqState
    report_ : SolveReport
    certificate_ : Certificate
    """

    def __init__(self, epsilon=1e-4, eta=1e-6, rho=None, memory=None, beta=0.2,
                 max_iter=500, tau_boundary=0.95, alpha_min=1e-12, split_steps=True,
                 centering="identity", keep_trace=False):
        self.epsilon = epsilon
        self.eta = eta
        self.rho = rho
        self.memory = memory
        self.beta = beta
        self.max_iter = max_iter
        self.tau_boundary = tau_boundary
        self.alpha_min = alpha_min
        self.split_steps = split_steps
        self.centering = centering
        self.keep_trace = keep_trace

    def _config(self):
        return SolverConfig(**self.get_params())

    def fit(self, inst, init=None):
        inst = check_instance(inst)
        cfg = self._config()
        if isinstance(inst, QpInstance):
            state, report = solve_qp(inst, cfg, init)
            self.lambda_ = None
        else:
            state, report = solve_qq(inst, cfg, init)
            self.lambda_ = state.lam
        self.state_ = state
        self.report_ = report
        self.x_ = state.x
        self.sigma_ = state.sigma
        self.certificate_ = certify(inst, state)
        return self

    def score(self, inst):
        """Negative duality gap magnitude of the fitted state on ``inst``."""
        return -abs(certify(check_instance(inst), self.state_).gap)
