"""Scalar convex functions, their conjugates, and implicit convex compositions.

An implicit convex function is ``f(x) = V(phi(x))`` with ``V`` convex and
``phi`` a nonlinear map. Its Lagrangian is ``L(x, s) = s * phi(x) - V*(s)``.
"""
import math

import numpy as np

from .exceptions import DomainError

__all__ = [
    "ScalarConvexFunction",
    "Square",
    "NegExp",
    "register",
    "get_function",
    "conj_eval",
    "fenchel_residual",
    "ImplicitConvexFunction",
    "GaussianDualSolution",
    "gaussian_dual_solve",
    "gaussian_primal",
    "gaussian_dual",
]


class ScalarConvexFunction:
    """Interface for a convex ``V: R -> R`` with a closed-form conjugate."""

    name = None

    def __call__(self, y):
        raise NotImplementedError

    def derivative(self, y):
        raise NotImplementedError

    def in_conjugate_domain(self, sigma):
        raise NotImplementedError

    def conjugate(self, sigma):
        raise NotImplementedError

    def conjugate_derivative(self, sigma):
        raise NotImplementedError

    def fenchel_residual(self, y, sigma):
        return self(y) + self.conjugate(sigma) - y * sigma

    def _check(self, sigma):
        if not self.in_conjugate_domain(sigma):
            raise DomainError(
                f"sigma={sigma!r} is outside the conjugate domain of {self.name}"
                f" ({self.domain_description})"
            )

    def __repr__(self):
        return f"{type(self).__name__}()"


class Square(ScalarConvexFunction):
    """``V(y) = y**2`` with ``V*(s) = s**2 / 4`` on all of R."""

    name = "square"
    domain_description = "sigma must be finite"

    def __call__(self, y):
        return y * y

    def derivative(self, y):
        return 2.0 * y

    def in_conjugate_domain(self, sigma):
        return bool(np.isfinite(sigma))

    def conjugate(self, sigma):
        self._check(sigma)
        return 0.25 * sigma * sigma

    def conjugate_derivative(self, sigma):
        self._check(sigma)
        return 0.5 * sigma

    def fenchel_residual(self, y, sigma):
        # Completed square; avoids cancellation when y ~ sigma / 2.
        self._check(sigma)
        r = y - 0.5 * sigma
        return r * r


class NegExp(ScalarConvexFunction):
    """``V(y) = exp(-y)`` with ``V*(s) = -s (log(-s) - 1)`` for ``s <= 0``.

    ``V*(0) = 0`` by continuous extension.
    """

    name = "negexp"
    domain_description = "sigma must be <= 0"

    def __call__(self, y):
        return math.exp(-y)

    def derivative(self, y):
        return -math.exp(-y)

    def in_conjugate_domain(self, sigma):
        return bool(np.isfinite(sigma) and sigma <= 0.0)

    def conjugate(self, sigma):
        self._check(sigma)
        if sigma == 0.0:
            return 0.0
        return -sigma * (math.log(-sigma) - 1.0)

    def conjugate_derivative(self, sigma):
        self._check(sigma)
        if sigma == 0.0:
            raise DomainError("conjugate of negexp is not differentiable at 0")
        return -math.log(-sigma)


_REGISTRY = {}


def register(cls):
    """Register a :class:`ScalarConvexFunction` subclass under ``cls.name``."""
    _REGISTRY[cls.name] = cls
    return cls


register(Square)
register(NegExp)


def get_function(kind):
    if isinstance(kind, ScalarConvexFunction):
        return kind
    try:
        return _REGISTRY[kind]()
    except KeyError:
        raise ValueError(
            f"unknown convex function kind {kind!r}; known: {sorted(_REGISTRY)}"
        ) from None


def conj_eval(V, sigma):
    return get_function(V).conjugate(sigma)


def fenchel_residual(V, y, sigma):
    """Fenchel-Young residual ``V(y) + V*(s) - y s``; zero iff ``s = V'(y)``."""
    return get_function(V).fenchel_residual(y, sigma)


class ImplicitConvexFunction:
    """Composition ``V(phi(x))`` together with its Lagrangian.

    Parameters
    ----------
    V : ScalarConvexFunction or str
        Outer convex function.
    phi : callable
        Inner map ``R^n -> R``.
    """

    def __init__(self, V, phi):
        self.V = get_function(V)
        self.phi = phi

    def __call__(self, x):
        return self.V(self.phi(x))

    def lagrangian(self, x, sigma):
        return sigma * self.phi(x) - self.V.conjugate(sigma)

    def fenchel_residual(self, x, sigma):
        return fenchel_residual(self.V, self.phi(x), sigma)


class GaussianDualSolution:
    """Closed-form primal/dual optimum of ``exp(-x**2) + beta * x**2``."""

    def __init__(self, sigma_star, g_star, x_star):
        self.sigma_star = sigma_star
        self.g_star = g_star
        self.x_star = x_star

    def __iter__(self):
        return iter((self.sigma_star, self.g_star, self.x_star))

    def __repr__(self):
        return (
            f"GaussianDualSolution(sigma_star={self.sigma_star!r}, "
            f"g_star={self.g_star!r}, x_star={self.x_star!r})"
        )


def gaussian_primal(x, beta):
    x = np.asarray(x, dtype=float)
    return np.exp(-x * x) + beta * x * x


def gaussian_dual(sigma):
    """Dual function ``s (log(-s) - 1)`` of the regularized Gaussian, ``s <= 0``."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma > 0):
        raise DomainError("gaussian dual is defined for sigma <= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(sigma == 0.0, 0.0, sigma * (np.log(-sigma) - 1.0))
    return out if out.ndim else float(out)


def gaussian_dual_solve(beta):
    """Optimal dual variable, common optimal value and primal minimizers.

    The dual feasible set is ``-beta <= s <= 0``. The unconstrained dual
    maximizer is ``s = -1``, so the optimum sits there when ``beta >= 1`` and
    on the boundary ``s = -beta`` otherwise.
    """
    if not (np.isfinite(beta) and beta > 0):
        raise DomainError(f"beta must be positive, got {beta!r}")
    if beta >= 1.0:
        return GaussianDualSolution(-1.0, 1.0, (0.0,))
    r = math.sqrt(-math.log(beta))
    return GaussianDualSolution(-beta, beta * (1.0 - math.log(beta)), (-r, r))
