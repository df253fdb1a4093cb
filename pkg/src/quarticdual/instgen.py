"""Seeded random test instances with controlled conditioning.

All randomness comes from ``numpy.random.default_rng(seed)`` (the PCG64
bit generator), drawn in a fixed order, so an instance is a pure function
of ``(n, cond, family, seed)``.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, GenerationError
from .problems import QpInstance, QqInstance, QuadraticForm
from .symlin import min_eigenvalue

__all__ = [
    "Family",
    "GenSpec",
    "random_orthogonal",
    "random_spd",
    "random_indefinite",
    "gen_qp",
    "gen_qq",
    "generate",
]


class Family(str, enum.Enum):
    QP_INDEF_PD = "qp_indef_pd"
    QQ_INDEF_CONSTRAINT = "qq_indef_constraint"
    QQ_NEGDEF_CONSTRAINT = "qq_negdef_constraint"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"qp": cls.QP_INDEF_PD, "qq1": cls.QQ_INDEF_CONSTRAINT,
                   "qq2": cls.QQ_NEGDEF_CONSTRAINT}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            names = sorted([f.value for f in cls] + list(aliases))
            raise ValueError(f"unknown family {value!r}; choose from {names}") from None


@dataclass(frozen=True)
class GenSpec:
    n: int
    cond: float
    family: Family
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not self.cond >= 1:
            raise ValueError("cond must be >= 1")


def _rng(seed):
    return np.random.default_rng(seed)


def random_orthogonal(n, rng):
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    # Sign fix makes the factorization unique (Haar-distributed Q).
    return Q * np.sign(np.diag(R))


def _eigen_magnitudes(n, cond):
    return np.geomspace(1.0, cond, n)


def _from_spectrum(values, Q):
    A = (Q * values) @ Q.T
    return 0.5 * (A + A.T)


def random_spd(n, cond, seed=None):
    """SPD matrix with eigenvalues geometrically spaced in ``[1, cond]``."""
    if not cond >= 1:
        raise DomainError("cond must be >= 1")
    rng = _rng(seed)
    Q = random_orthogonal(n, rng)
    if cond == 1:
        return np.eye(n)
    return _from_spectrum(_eigen_magnitudes(n, cond), Q)


def random_indefinite(n, cond, seed=None):
    """Symmetric matrix with eigenvalue magnitudes in ``[1, cond]`` and
    ``ceil(n/2)`` of them negated."""
    if n < 2:
        raise DomainError("an indefinite matrix needs n >= 2")
    if not cond >= 1:
        raise DomainError("cond must be >= 1")
    rng = _rng(seed)
    Q = random_orthogonal(n, rng)
    values = _eigen_magnitudes(n, cond)
    flip = rng.permutation(n)[: math.ceil(n / 2)]
    values[flip] *= -1.0
    return _from_spectrum(values, Q)


def _child_seeds(seed, k):
    return np.random.SeedSequence(seed).spawn(k)


def gen_qp(params):
    """Indefinite ``A0``, SPD ``A1``; records an Assumption-1 witness."""
    params = params if isinstance(params, GenSpec) else GenSpec(**params)
    if params.family is not Family.QP_INDEF_PD:
        raise ValueError(f"gen_qp cannot generate family {params.family.value}")
    n, cond = params.n, params.cond
    s_a0, s_a1, s_vec = _child_seeds(params.seed, 3)
    A0 = random_indefinite(n, cond, s_a0)
    A1 = random_spd(n, cond, s_a1)
    rng = _rng(s_vec)
    b0, b1 = rng.standard_normal(n), rng.standard_normal(n)
    c0, c1 = rng.standard_normal(2)
    alpha = (abs(min_eigenvalue(A0)) + 0.1) / min_eigenvalue(A1)
    return QpInstance(
        QuadraticForm(A0, b0, c0), QuadraticForm(A1, b1, c1),
        witness_alpha=alpha, seed=params.seed, cond=float(cond), family=params.family.value,
    )


def _sample_slater(q2, rng, seed, tries=1000):
    n = q2.n
    scale = 1.0 + np.linalg.norm(q2.b) + math.sqrt(abs(q2.c))
    for k in range(tries):
        r = scale * 2.0 ** (k % 10 - 3)
        x = r * rng.standard_normal(n)
        if q2(x) < -1e-8:
            return x
    raise GenerationError("no Slater point found after %d samples" % tries, seed=seed)


def gen_qq(params):
    """Constrained instances of the two test families.

    ``qq_indef_constraint``: SPD ``A1``, indefinite ``A2``, Slater point by
    sampling.

    ``qq_negdef_constraint``: SPD ``A0``, ``A1``; ``c1`` places a nonempty
    ellipsoid ``{q1 <= 0}`` of center ``-A1^{-1} b1``, ``c0`` makes
    ``{q0 <= 0}`` enclose it, and the constraint is ``q2 = -q0``.
    """
    params = params if isinstance(params, GenSpec) else GenSpec(**params)
    n, cond = params.n, params.cond
    fam = params.family
    if fam is Family.QQ_INDEF_CONSTRAINT:
        s_a1, s_a2, s_vec, s_slater = _child_seeds(params.seed, 4)
        A1 = random_spd(n, cond, s_a1)
        A2 = random_indefinite(n, cond, s_a2)
        rng = _rng(s_vec)
        b1, b2 = rng.standard_normal(n), rng.standard_normal(n)
        c1, c2 = rng.standard_normal(2)
        q1 = QuadraticForm(A1, b1, c1)
        q2 = QuadraticForm(A2, b2, c2)
        slater = _sample_slater(q2, _rng(s_slater), params.seed)
        extra = {}
    elif fam is Family.QQ_NEGDEF_CONSTRAINT:
        s_a0, s_a1, s_vec = _child_seeds(params.seed, 3)
        A0 = random_spd(n, cond, s_a0)
        A1 = random_spd(n, cond, s_a1)
        rng = _rng(s_vec)
        b0, b1 = rng.standard_normal(n), rng.standard_normal(n)
        x1 = -np.linalg.solve(A1, b1)
        c1 = float(b1 @ (-x1) - 1.0)
        R1 = 1.0 / math.sqrt(min_eigenvalue(A1))
        r = np.linalg.norm(x1) + R1
        lmax0 = float(np.linalg.eigvalsh(A0)[-1])
        c0 = -(lmax0 * r * r + 2.0 * np.linalg.norm(b0) * r) - 1.0
        q1 = QuadraticForm(A1, b1, c1)
        q2 = QuadraticForm(-A0, -b0, -c0)
        e1 = np.zeros(n)
        e1[0] = 1.0
        t = 1.0
        for _ in range(200):
            slater = x1 + t * e1
            if q2(slater) < -1e-8:
                break
            t *= 2.0
        else:
            raise GenerationError("no Slater point found along x1 + t e1", seed=params.seed)
        extra = {"center": x1.tolist(), "radius": R1}
    else:
        raise ValueError(f"gen_qq cannot generate family {fam.value}")
    return QqInstance(
        q1, q2, slater_point=slater, seed=params.seed, cond=float(cond),
        family=fam.value, extra=extra,
    )


def generate(n, cond, family, seed):
    params = GenSpec(n, cond, family, seed)
    if params.family is Family.QP_INDEF_PD:
        return gen_qp(params)
    return gen_qq(params)
