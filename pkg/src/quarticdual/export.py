"""Linear SDP forms of the convex duals, SDPA sparse files, multiplier import.

The SDPA convention is

    minimize    sum_i c_i y_i
    subject to  sum_i y_i F_i - F_0  >= 0   (block-diagonal, PSD)

Each quadratic term ``sigma**2 / 4`` of a dual objective is replaced by an
epigraph variable ``t`` with the 2 x 2 block ``[[1, sigma/2], [sigma/2, t]]``,
which is PSD exactly when ``t >= sigma**2 / 4``. Maximizing ``gamma - t``
becomes minimizing ``t - gamma``.
"""
import re
from dataclasses import dataclass, field

import numpy as np

from .exceptions import FormatError
from .problems import QpInstance, QqInstance, bordered

__all__ = [
    "SdpBlockProblem",
    "build_dual_qp",
    "build_dual_qq",
    "build_dual_general",
    "write_sdpa",
    "parse_sdpa",
    "read_sdpa",
    "dumps_sdpa",
    "import_multiplier",
    "write_multiplier",
]


@dataclass
class SdpBlockProblem:
    """Block-diagonal linear SDP.

    ``entries`` maps ``(var, block, i, j)`` (1-based, ``i <= j``, ``var = 0``
    for the constant matrix ``F_0``) to a value. Negative block sizes denote
    diagonal blocks.
    """

    num_vars: int
    block_sizes: tuple
    objective: np.ndarray
    entries: dict = field(default_factory=dict)
    var_names: tuple = ()

    def __post_init__(self):
        self.block_sizes = tuple(int(b) for b in self.block_sizes)
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.num_vars,):
            raise ValueError("objective length must equal num_vars")
        for key in self.entries:
            self._check_key(key)

    def _check_key(self, key):
        var, block, i, j = key
        if not 0 <= var <= self.num_vars:
            raise ValueError(f"variable index {var} out of range")
        if not 1 <= block <= len(self.block_sizes):
            raise ValueError(f"block index {block} out of range")
        size = abs(self.block_sizes[block - 1])
        if not 1 <= i <= j <= size:
            raise ValueError(f"entry ({i}, {j}) invalid for block of size {size}")
        if self.block_sizes[block - 1] < 0 and i != j:
            raise ValueError("off-diagonal entry in a diagonal block")

    def add(self, var, block, M):
        """Add the upper triangle of the dense matrix ``M`` as coefficients
        of ``var`` in ``block``; zeros are skipped."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        size = M.shape[0]
        for i in range(size):
            for j in range(i, size):
                if M[i, j] != 0.0:
                    key = (var, block, i + 1, j + 1)
                    self._check_key(key)
                    self.entries[key] = self.entries.get(key, 0.0) + float(M[i, j])

    def coefficient_matrix(self, var, block):
        """Dense symmetric coefficient matrix of ``var`` in ``block``."""
        size = abs(self.block_sizes[block - 1])
        M = np.zeros((size, size))
        for (v, b, i, j), value in self.entries.items():
            if v == var and b == block:
                M[i - 1, j - 1] = value
                M[j - 1, i - 1] = value
        return M

    def block_values(self, y):
        """Blocks of ``sum_i y_i F_i - F_0`` at the point ``y``."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.num_vars,):
            raise ValueError(f"y must have length {self.num_vars}")
        blocks = [np.zeros((abs(s), abs(s))) for s in self.block_sizes]
        for (v, b, i, j), value in self.entries.items():
            coef = -1.0 if v == 0 else y[v - 1]
            blocks[b - 1][i - 1, j - 1] += coef * value
            if i != j:
                blocks[b - 1][j - 1, i - 1] += coef * value
        return blocks

    def objective_value(self, y):
        return float(self.objective @ np.asarray(y, dtype=float))

    def sorted_entries(self):
        return sorted(self.entries.items())

    def __eq__(self, other):
        if not isinstance(other, SdpBlockProblem):
            return NotImplemented
        return (
            self.num_vars == other.num_vars
            and self.block_sizes == other.block_sizes
            and np.array_equal(self.objective, other.objective)
            and self.entries == other.entries
        )

    __hash__ = None


def _corner(size):
    E = np.zeros((size, size))
    E[-1, -1] = 1.0
    return E


_EPI_CONST = np.array([[1.0, 0.0], [0.0, 0.0]])
_EPI_SIGMA = np.array([[0.0, 0.5], [0.5, 0.0]])
_EPI_T = np.array([[0.0, 0.0], [0.0, 1.0]])


def build_dual_general(forms, constraint):
    """Dual of ``min sum_i q_i(x)**2  s.t.  q(x) <= 0`` as a linear SDP.

    Variables are ``(sigma_1..sigma_m, lam, gamma, t_1..t_m)``. Blocks:
    the main LMI with pencil ``sum sigma_i A_i + lam A``, one epigraph block
    per ``sigma_i``, and a 1 x 1 diagonal block for ``lam >= 0``.
    """
    forms = list(forms)
    m = len(forms)
    if m < 1:
        raise ValueError("at least one quadratic form is required")
    n = constraint.n
    for q in forms:
        if q.n != n:
            raise ValueError("all forms must share the dimension of the constraint")
    num_vars = 2 * m + 2
    i_lam, i_gamma = m + 1, m + 2
    objective = np.zeros(num_vars)
    objective[i_gamma - 1] = -1.0
    objective[m + 2:] = 1.0
    sizes = [n + 1] + [2] * m + [-1]
    names = [f"sigma{i + 1}" for i in range(m)] + ["lambda", "gamma"] + [f"t{i + 1}" for i in range(m)]
    P = SdpBlockProblem(num_vars, sizes, objective, var_names=tuple(names))
    for i, q in enumerate(forms):
        P.add(i + 1, 1, bordered(q))
    P.add(i_lam, 1, bordered(constraint))
    P.add(i_gamma, 1, -_corner(n + 1))
    for i in range(m):
        blk = 2 + i
        P.add(0, blk, -_EPI_CONST)
        P.add(i + 1, blk, _EPI_SIGMA)
        P.add(i_gamma + 1 + i, blk, _EPI_T)
    P.add(i_lam, m + 2, np.ones((1, 1)))
    return P


def build_dual_qq(inst):
    """Dual of the constrained problem; variables ``(lam, sigma, gamma, t)``."""
    if not isinstance(inst, QqInstance):
        raise TypeError("build_dual_qq expects a QqInstance")
    n = inst.n
    P = SdpBlockProblem(4, [n + 1, 2, -1], [0.0, 0.0, -1.0, 1.0],
                        var_names=("lambda", "sigma", "gamma", "t"))
    P.add(1, 1, bordered(inst.q2))
    P.add(2, 1, bordered(inst.q1))
    P.add(3, 1, -_corner(n + 1))
    P.add(0, 2, -_EPI_CONST)
    P.add(2, 2, _EPI_SIGMA)
    P.add(4, 2, _EPI_T)
    P.add(1, 3, np.ones((1, 1)))
    return P


def build_dual_qp(inst):
    """Dual of the unconstrained problem; variables ``(sigma, gamma, t)``."""
    if not isinstance(inst, QpInstance):
        raise TypeError("build_dual_qp expects a QpInstance")
    n = inst.n
    P = SdpBlockProblem(3, [n + 1, 2], [0.0, -1.0, 1.0],
                        var_names=("sigma", "gamma", "t"))
    P.add(0, 1, -bordered(inst.q0))
    P.add(1, 1, bordered(inst.q1))
    P.add(2, 1, -_corner(n + 1))
    P.add(0, 2, -_EPI_CONST)
    P.add(1, 2, _EPI_SIGMA)
    P.add(3, 2, _EPI_T)
    return P


# -- SDPA sparse format -----------------------------------------------------


def _fmt(v):
    return "%.17g" % v


def dumps_sdpa(problem, comment=None):
    lines = []
    if comment is None and problem.var_names:
        comment = "variables: " + " ".join(problem.var_names)
    if comment:
        lines.append('"' + comment.replace("\n", " "))
    lines.append(str(problem.num_vars))
    lines.append(str(len(problem.block_sizes)))
    lines.append(" ".join(str(b) for b in problem.block_sizes))
    lines.append(" ".join(_fmt(c) for c in problem.objective))
    for (v, b, i, j), value in problem.sorted_entries():
        lines.append(f"{v} {b} {i} {j} {_fmt(value)}")
    return "\n".join(lines) + "\n"


def write_sdpa(problem, path, comment=None):
    """Write ``problem`` in SDPA sparse format (``.dat-s``)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_sdpa(problem, comment))


_SEPARATORS = re.compile(r"[,{}()]")


def _tokens(line):
    """Whitespace tokens with their 1-based columns, treating ``,{}()`` as
    blanks as SDPA readers do."""
    clean = _SEPARATORS.sub(" ", line)
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", clean)]


def _number(tok, col, lineno, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise FormatError(f"expected a number, got {tok!r}", line=lineno, column=col) from None


def parse_sdpa(text):
    """Parse SDPA sparse text into an :class:`SdpBlockProblem`."""
    lines = text.splitlines()
    header = []
    body_start = None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or (not header and stripped[0] in '"*'):
            continue
        header.append((lineno, _tokens(line)))
        if len(header) == 4:
            body_start = lineno
            break
    if len(header) < 4:
        raise FormatError("truncated header: expected 4 header lines", line=len(lines))
    (l1, t1), (l2, t2), (l3, t3), (l4, t4) = header
    num_vars = _number(t1[0][0], t1[0][1], l1, int)
    num_blocks = _number(t2[0][0], t2[0][1], l2, int)
    if len(t3) < num_blocks:
        raise FormatError(f"expected {num_blocks} block sizes", line=l3)
    sizes = [_number(tok, col, l3, int) for tok, col in t3[:num_blocks]]
    if len(t4) < num_vars:
        raise FormatError(f"expected {num_vars} objective coefficients", line=l4)
    objective = [_number(tok, col, l4) for tok, col in t4[:num_vars]]
    problem = SdpBlockProblem(num_vars, sizes, objective)
    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        toks = _tokens(line)
        if not toks:
            continue
        if len(toks) != 5:
            raise FormatError(f"entry line needs 5 fields, found {len(toks)}", line=lineno, column=toks[0][1])
        v, b, i, j = (_number(tok, col, lineno, int) for tok, col in toks[:4])
        value = _number(*toks[4], lineno)
        if i > j:
            i, j = j, i
        key = (v, b, i, j)
        try:
            problem._check_key(key)
        except ValueError as exc:
            raise FormatError(str(exc), line=lineno, column=toks[0][1]) from None
        if key in problem.entries:
            raise FormatError(f"duplicate entry {key}", line=lineno, column=toks[0][1])
        problem.entries[key] = value
    return problem


def read_sdpa(path):
    with open(path, encoding="ascii") as fh:
        return parse_sdpa(fh.read())


# -- multiplier matrices -----------------------------------------------------


def import_multiplier(path, n=None, tol=1e-9):
    """Read an (n+1) x (n+1) symmetric matrix stored as whitespace-separated
    reals in row-major order.

    The size is inferred from the number of values unless ``n`` is given.
    """
    values = []
    last = (1, 1)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            for m in re.finditer(r"\S+", line):
                values.append(_number(m.group(), m.start() + 1, lineno))
                last = (lineno, m.start() + 1)
    count = len(values)
    size = int(round(np.sqrt(count)))
    if size * size != count or size < 2:
        raise FormatError(
            f"{count} values do not form a square matrix of size >= 2", line=last[0], column=last[1]
        )
    if n is not None and size != n + 1:
        raise FormatError(f"expected a {n + 1} x {n + 1} matrix, found {size} x {size}")
    Z = np.array(values).reshape(size, size)
    if not np.all(np.isfinite(Z)):
        raise FormatError("matrix has non-finite entries")
    if np.linalg.norm(Z - Z.T) > tol * (1.0 + np.linalg.norm(Z)):
        raise FormatError("matrix is not symmetric")
    return 0.5 * (Z + Z.T)


def write_multiplier(Z, path):
    Z = np.asarray(Z, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        for row in Z:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
