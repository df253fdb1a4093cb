"""Quadratic forms, the two quartic problems, their Lagrangians and duals.

* ``QpInstance``: minimize ``q0(x) + q1(x)**2`` over R^n.
* ``QqInstance``: minimize ``q1(x)**2`` subject to ``q2(x) <= 0``.

with ``q(x) = x'Ax + 2b'x + c``.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, FormatError
from .symlin import as_symmetric, min_eigenvalue, pack_lower, pseudo_solve, unpack_lower

__all__ = [
    "QuadraticForm",
    "QpInstance",
    "QqInstance",
    "qform_eval",
    "f_qp",
    "f_qq",
    "lagrangian_qp",
    "lagrangian_qq",
    "dual_gamma_qp",
    "dual_objective_qp",
    "dual_objective_qq",
    "cone_tolerance",
    "bordered",
    "save_instance",
    "load_instance",
    "instance_to_dict",
    "instance_from_dict",
]


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``q(x) = x'Ax + 2b'x + c`` with symmetric ``A``."""

    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        A = as_symmetric(self.A, name="A")
        b = np.array(self.b, dtype=float).ravel()
        if b.shape != (A.shape[0],):
            raise ValueError(
                f"b has length {b.size}, expected {A.shape[0]} to match A"
            )
        c = float(self.c)
        if not (np.all(np.isfinite(b)) and np.isfinite(c)):
            raise ValueError("quadratic form has non-finite entries")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self):
        return self.A.shape[0]

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, n)), np.zeros(n), 0.0)

    def __call__(self, x):
        x = self._check_x(x)
        return float(x @ self.A @ x + 2.0 * self.b @ x + self.c)

    def gradient(self, x):
        x = self._check_x(x)
        return 2.0 * (self.A @ x + self.b)

    def _check_x(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.shape != (self.n,):
            raise ValueError(f"x has length {x.size}, expected {self.n}")
        return x

    def __eq__(self, other):
        if not isinstance(other, QuadraticForm):
            return NotImplemented
        return (
            np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
            and self.c == other.c
        )

    __hash__ = None


def bordered(q):
    """The (n+1)x(n+1) matrix ``[[A, b], [b', c]]`` of a quadratic form."""
    n = q.n
    M = np.empty((n + 1, n + 1))
    M[:n, :n] = q.A
    M[:n, n] = q.b
    M[n, :n] = q.b
    M[n, n] = q.c
    return M


def _check_pair(first, second):
    if first.n != second.n:
        raise ValueError(f"dimension mismatch: {first.n} != {second.n}")


@dataclass(frozen=True, eq=False)
class QpInstance:
    """Unconstrained quartic problem ``min q0(x) + q1(x)**2``."""

    q0: QuadraticForm
    q1: QuadraticForm
    witness_alpha: float = None
    seed: int = None
    cond: float = None
    family: str = None

    def __post_init__(self):
        _check_pair(self.q0, self.q1)

    @property
    def n(self):
        return self.q0.n

    def __eq__(self, other):
        if not isinstance(other, QpInstance):
            return NotImplemented
        return instance_to_dict(self) == instance_to_dict(other)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class QqInstance:
    """Constrained quartic problem ``min q1(x)**2  s.t.  q2(x) <= 0``."""

    q1: QuadraticForm
    q2: QuadraticForm
    slater_point: np.ndarray = None
    seed: int = None
    cond: float = None
    family: str = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_pair(self.q1, self.q2)
        if self.slater_point is not None:
            p = np.array(self.slater_point, dtype=float).ravel()
            if p.shape != (self.n,):
                raise ValueError("slater_point has the wrong dimension")
            p.setflags(write=False)
            object.__setattr__(self, "slater_point", p)

    @property
    def n(self):
        return self.q1.n

    def __eq__(self, other):
        if not isinstance(other, QqInstance):
            return NotImplemented
        return instance_to_dict(self) == instance_to_dict(other)

    __hash__ = None


def qform_eval(q, x):
    return q(x)


def f_qp(inst, x):
    return inst.q0(x) + inst.q1(x) ** 2


def f_qq(inst, x):
    return inst.q1(x) ** 2


def lagrangian_qp(inst, x, sigma):
    return inst.q0(x) + sigma * inst.q1(x) - 0.25 * sigma * sigma


def lagrangian_qq(inst, x, lam, sigma):
    if lam < 0:
        raise DomainError(f"multiplier must be nonnegative, got {lam!r}")
    return sigma * inst.q1(x) + lam * inst.q2(x) - 0.25 * sigma * sigma


def cone_tolerance(M):
    return 1e-9 * (1.0 + np.linalg.norm(M))


def _schur_value(A, b, c):
    """``c - b' A^+ b`` and whether ``A >= 0`` with ``b`` in its range."""
    if min_eigenvalue(A) < -cone_tolerance(A):
        return -np.inf, False
    sol, in_range = pseudo_solve(A, b)
    if not in_range:
        return -np.inf, False
    return float(c - b @ sol), True


def dual_gamma_qp(inst, sigma):
    """Schur-complement value ``gamma(sigma)`` and dual feasibility flag.

    The dual objective is ``gamma - sigma**2 / 4``; ``gamma = -inf`` when
    infeasible.
    """
    q0, q1 = inst.q0, inst.q1
    return _schur_value(q0.A + sigma * q1.A, q0.b + sigma * q1.b, q0.c + sigma * q1.c)


def dual_objective_qp(inst, sigma):
    gamma, feasible = dual_gamma_qp(inst, sigma)
    return gamma - 0.25 * sigma * sigma, feasible


def dual_objective_qq(inst, lam, sigma):
    """Dual objective of the constrained problem at ``(lam, sigma)``."""
    if lam < 0:
        return -np.inf, False
    q1, q2 = inst.q1, inst.q2
    gamma, feasible = _schur_value(
        sigma * q1.A + lam * q2.A, sigma * q1.b + lam * q2.b, sigma * q1.c + lam * q2.c
    )
    return gamma - 0.25 * sigma * sigma, feasible


# -- instance file format -----------------------------------------------------


def _form_to_dict(q):
    return {"A": pack_lower(q.A).tolist(), "b": q.b.tolist(), "c": q.c}


def _form_from_dict(d, n):
    try:
        return QuadraticForm(unpack_lower(d["A"], n), d["b"], d["c"])
    except KeyError as exc:
        raise FormatError(f"quadratic form is missing field {exc.args[0]!r}") from None


def instance_to_dict(inst):
    if isinstance(inst, QpInstance):
        doc = {"problem": "qp", "n": inst.n, "forms": [_form_to_dict(inst.q0), _form_to_dict(inst.q1)]}
        if inst.witness_alpha is not None:
            doc["witness_alpha"] = float(inst.witness_alpha)
    elif isinstance(inst, QqInstance):
        doc = {"problem": "qq", "n": inst.n, "forms": [_form_to_dict(inst.q1), _form_to_dict(inst.q2)]}
        if inst.slater_point is not None:
            doc["slater_point"] = inst.slater_point.tolist()
        if inst.extra:
            doc["extra"] = dict(inst.extra)
    else:
        raise TypeError(f"not a problem instance: {type(inst).__name__}")
    doc["seed"] = inst.seed
    doc["cond"] = inst.cond
    doc["family"] = inst.family
    return doc


def instance_from_dict(doc):
    try:
        problem = doc["problem"]
        n = int(doc["n"])
        forms = doc["forms"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"instance document is missing field {exc}") from None
    if len(forms) != 2:
        raise FormatError(f"expected 2 quadratic forms, found {len(forms)}")
    try:
        first, second = (_form_from_dict(f, n) for f in forms)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    common = dict(seed=doc.get("seed"), cond=doc.get("cond"), family=doc.get("family"))
    if problem == "qp":
        return QpInstance(first, second, witness_alpha=doc.get("witness_alpha"), **common)
    if problem == "qq":
        return QqInstance(
            first, second, slater_point=doc.get("slater_point"),
            extra=doc.get("extra", {}), **common,
        )
    raise FormatError(f"unknown problem type {problem!r}")


def save_instance(inst, path):
    """Write an instance as UTF-8 JSON.

    Floats use Python's shortest round-trip representation, so reading the
    file back reproduces every value bit for bit.
    """
    text = json.dumps(instance_to_dict(inst), indent=1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def load_instance(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(exc.msg, line=exc.lineno, column=exc.colno) from None
    return instance_from_dict(doc)
