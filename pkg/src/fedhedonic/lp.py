"""Dense two-phase tableau simplex for small LPs with free variables.

Problems have the form ``max c.x  s.t.  A x <= b`` with every variable free.
Free variables are split as ``x = x_pos - x_neg`` and each row gets a slack,
so the standard-form matrix ``[A, -A, I]`` always has full row rank. Rows
with a negative bound are negated and seeded with an artificial column for
phase 1.

Pivoting is Dantzig's largest-coefficient rule until a run of degenerate
pivots is observed, then Bland's rule for the rest of the phase. The final
basis is re-solved directly against the original data and the dual vector is
recovered from ``B^T y = c_B``, which gives a checkable optimality
certificate (primal feasibility, dual feasibility and zero duality gap).
"""

from __future__ import annotations

import math
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import LpSolverError

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
CERT_TOL = 1e-8
PIVOT_TOL = 1e-10
DEGENERATE_RUN = 25
MAX_PIVOTS = 100_000

Status = Literal["optimal", "unbounded", "infeasible"]


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        k = self.c.shape[0]
        if k < 1:
            raise ValueError("problem needs at least one variable")
        if self.A.shape != (self.b.shape[0], k):
            raise ValueError("row lengths must equal the number of variables")
        if not (np.isfinite(self.c).all() and np.isfinite(self.A).all() and np.isfinite(self.b).all()):
            raise ValueError("coefficients must be finite")

    @classmethod
    def from_rows(
        cls, c: Sequence[float], rows: Iterable[tuple[Sequence[float], float]] = ()
    ) -> LpProblem:
        c_arr = np.asarray(c, dtype=float)
        rows = list(rows)
        A = np.array([r for r, _ in rows], dtype=float).reshape(len(rows), c_arr.shape[0])
        b = np.array([bound for _, bound in rows], dtype=float)
        return cls(c_arr, A, b)

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: Status
    x: np.ndarray | None = None
    objective: float | None = None
    dual: np.ndarray | None = None
    pivots: int = 0


class _Tableau:
    """Constraint rows plus objective row, rhs in the last column."""

    def __init__(self, rows: np.ndarray, basis: list[int]):
        self.T = rows
        self.basis = basis
        self.pivots = 0

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def set_objective(self, obj: np.ndarray) -> None:
        """Install reduced costs for ``max obj.x`` given the current basis."""
        m = self.m
        z = np.zeros(self.T.shape[1])
        z[: obj.shape[0]] = -obj
        for r, j in enumerate(self.basis):
            if j < obj.shape[0] and obj[j] != 0:
                z -= -obj[j] * self.T[r]
        self.T[m] = z

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.pivots += 1

    def run(self, allowed: int) -> bool:
        """Optimize over the first ``allowed`` columns. False means unbounded."""
        T = self.T
        m = self.m
        bland = False
        degenerate = 0
        while True:
            if self.pivots > MAX_PIVOTS:
                raise LpSolverError("pivot limit exceeded")
            reduced = T[m, :allowed]
            if bland:
                candidates = np.flatnonzero(reduced < -OPT_TOL)
                if candidates.size == 0:
                    return True
                j = int(candidates[0])
            else:
                j = int(np.argmin(reduced))
                if reduced[j] >= -OPT_TOL:
                    return True
            column = T[:m, j]
            positive = np.flatnonzero(column > PIVOT_TOL)
            if positive.size == 0:
                return False
            ratios = T[positive, -1] / column[positive]
            best = ratios.min()
            ties = positive[ratios <= best + 1e-12 * max(1.0, abs(best))]
            # Bland's leaving rule: smallest basic variable index among ties
            r = int(min(ties, key=lambda row: self.basis[row]))
            if T[r, -1] <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, j)


def solve(p: LpProblem) -> LpSolution:
    """Maximize ``c.x`` subject to ``A x <= b`` over free ``x``."""
    k = p.num_vars
    m = p.A.shape[0]
    if m == 0:
        if np.all(p.c == 0):
            return LpSolution("optimal", np.zeros(k), 0.0, np.zeros(0))
        return LpSolution("unbounded")

    n_std = 2 * k + m
    standard = np.hstack([p.A, -p.A, np.eye(m)])
    negated = p.b < 0
    n_art = int(negated.sum())
    width = n_std + n_art + 1
    rows = np.zeros((m + 1, width))
    rows[:m, :n_std] = standard
    rows[:m, -1] = p.b
    rows[:m][negated] *= -1.0
    basis = []
    art = n_std
    for r in range(m):
        if negated[r]:
            rows[r, art] = 1.0
            basis.append(art)
            art += 1
        else:
            basis.append(2 * k + r)
    tab = _Tableau(rows, basis)

    if n_art:
        phase1 = np.zeros(n_std + n_art)
        phase1[n_std:] = -1.0
        tab.set_objective(phase1)
        tab.run(n_std + n_art)
        infeasibility = -tab.T[m, -1]
        if infeasibility > FEAS_TOL * max(1.0, float(np.abs(p.b).max())):
            return LpSolution("infeasible", pivots=tab.pivots)
        for r in range(m):
            if tab.basis[r] >= n_std:
                candidates = np.flatnonzero(np.abs(tab.T[r, :n_std]) > PIVOT_TOL)
                if candidates.size == 0:
                    raise LpSolverError("artificial variable could not leave the basis")
                tab.pivot(r, int(candidates[0]))
        tab.T = np.delete(tab.T, np.s_[n_std : n_std + n_art], axis=1)

    obj = np.concatenate([p.c, -p.c, np.zeros(m)])
    tab.set_objective(obj)
    if not tab.run(n_std):
        return LpSolution("unbounded", pivots=tab.pivots)

    B = standard[:, tab.basis]
    try:
        x_basic = np.linalg.solve(B, p.b)
        y = np.linalg.solve(B.T, obj[tab.basis])
    except np.linalg.LinAlgError as exc:
        raise LpSolverError("final basis is singular") from exc
    full = np.zeros(n_std)
    full[tab.basis] = x_basic
    x = full[:k] - full[k : 2 * k]
    return LpSolution("optimal", x, float(p.c @ x), y, tab.pivots)


def duality_gap(p: LpProblem, s: LpSolution) -> float:
    if s.x is None or s.dual is None:
        return math.inf
    return abs(float(p.c @ s.x) - float(p.b @ s.dual))


def verify(p: LpProblem, s: LpSolution) -> bool:
    """Check an optimal solution against its dual certificate.

    Requires primal feasibility within ``FEAS_TOL``, a nonnegative dual that
    reproduces ``c`` through ``A^T y`` and a duality gap within ``CERT_TOL``.
    """
    if s.status != "optimal" or s.x is None or s.dual is None or s.objective is None:
        return False
    if s.x.shape != (p.num_vars,) or s.dual.shape != (p.A.shape[0],):
        return False
    if p.A.shape[0] and (p.A @ s.x - p.b).max() > FEAS_TOL:
        return False
    if s.dual.size and s.dual.min() < -FEAS_TOL:
        return False
    if np.abs(p.A.T @ s.dual - p.c).max() > CERT_TOL:
        return False
    if abs(s.objective - float(p.c @ s.x)) > FEAS_TOL:
        return False
    return duality_gap(p, s) <= CERT_TOL


@dataclass
class ConstraintSystem:
    """Named variables with sparse ``<=`` rows and a sparse maximization objective."""

    name: str
    variables: list[str] = field(default_factory=list)
    rows: list[tuple[str, dict[str, float], float]] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._index = {v: k for k, v in enumerate(self.variables)}

    def declare(self, var: str) -> None:
        if var not in self._index:
            self._index[var] = len(self.variables)
            self.variables.append(var)

    def add_row(self, name: str, coeffs: dict[str, float], bound: float) -> None:
        if not math.isfinite(bound):
            raise ValueError(f"row {name} has a non-finite bound")
        for var in coeffs:
            if var not in self._index:
                raise ValueError(f"row {name} references undeclared variable {var}")
        self.rows.append((name, dict(coeffs), float(bound)))

    def extend(self, other: ConstraintSystem) -> ConstraintSystem:
        merged = ConstraintSystem(f"{self.name}+{other.name}", list(self.variables), list(self.rows), dict(self.objective))
        for var in other.variables:
            merged.declare(var)
        merged.rows.extend(other.rows)
        for var, coef in other.objective.items():
            merged.objective[var] = merged.objective.get(var, 0.0) + coef
        return merged

    def to_problem(self) -> LpProblem:
        k = len(self.variables)
        c = np.zeros(k)
        for var, coef in self.objective.items():
            c[self._index[var]] = coef
        A = np.zeros((len(self.rows), k))
        b = np.zeros(len(self.rows))
        for r, (_, coeffs, bound) in enumerate(self.rows):
            for var, coef in coeffs.items():
                A[r, self._index[var]] += coef
            b[r] = bound
        return LpProblem(c, A, b)

    def dumps(self) -> str:
        lines = [f"NAME {self.name}", "SENSE MAX", f"VARIABLES {len(self.variables)}"]
        lines += [f" {v}" for v in self.variables]
        lines.append(f"ROWS {len(self.rows)}")
        for name, coeffs, bound in self.rows:
            terms = " ".join(f"{v} {coef!r}" for v, coef in coeffs.items())
            lines.append(f" {name} <= {bound!r} : {terms}")
        lines.append("OBJECTIVE")
        lines += [f" {v} {coef!r}" for v, coef in self.objective.items()]
        lines.append("END")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> ConstraintSystem:
        lines = text.splitlines()
        it = iter(lines)
        header = next(it).split(maxsplit=1)
        if header[0] != "NAME":
            raise ValueError("dump must start with NAME")
        system = cls(header[1] if len(header) > 1 else "")
        if next(it).strip() != "SENSE MAX":
            raise ValueError("only maximization dumps are supported")
        nvars = int(next(it).split()[1])
        for _ in range(nvars):
            system.declare(next(it).strip())
        nrows = int(next(it).split()[1])
        row_re = re.compile(r"^\s*(\S+) <= (\S+) :(.*)$")
        for _ in range(nrows):
            match = row_re.match(next(it))
            if match is None:
                raise ValueError("malformed row line")
            name, bound, rest = match.groups()
            toks = rest.split()
            coeffs = {toks[t]: float(toks[t + 1]) for t in range(0, len(toks), 2)}
            system.add_row(name, coeffs, float(bound))
        if next(it).strip() != "OBJECTIVE":
            raise ValueError("missing OBJECTIVE section")
        for line in it:
            if line.strip() == "END":
                return system
            var, coef = line.split()
            system.objective[var] = float(coef)
        raise ValueError("missing END")
