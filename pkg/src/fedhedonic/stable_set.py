"""Budget-balance and stability constraints, and searches for Nash-stable allocations.

Two routes are provided:

* :func:`find_general_allocation` searches over unrestricted allocation
  tables. The existential quantifier over partitions in the stability
  constraints is discharged by enumeration: for each candidate partition the
  budget rows and that partition's stability rows form one LP.
* :func:`solve_symmetric_lp` restricts to symmetric pairwise gains, where a
  Nash-stable partition always exists and only the budget rows remain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .combinatorics import Coalition, Partition, iter_partition_masks, members_of, pairs_of
from .dynamics import partition_of, run_dynamics
from .errors import CapacityError, LpSolverError
from .gains import GainReport
from .hedonic import (
    ORACLE_CAP,
    AllocationTable,
    MutualGainVector,
    has_deviation,
    check_nash_stable,
    phi_from_v,
)
from .lp import FEAS_TOL, ConstraintSystem, LpProblem, LpSolution, solve, verify

GENERAL_CAP = 8
SENTINEL = -1e6


def phi_var(i: int, mask: int) -> str:
    return f"phi_{i}_{mask}"


def v_var(i: int, j: int) -> str:
    return f"v_{i}_{j}"


def build_c1(report: GainReport, mode: Literal["general", "symmetric"] = "general") -> ConstraintSystem:
    """Budget rows for every coalition of size >= 2, objective = sum of all variables.

    Singleton rows read ``0 <= 0`` and are omitted. In symmetric mode each
    row sums the pair gains inside ``S`` against half the marginal gain.
    """
    n = report.n
    system = ConstraintSystem(f"c1-{mode}")
    if mode == "symmetric":
        for i, j in pairs_of(range(n)):
            system.declare(v_var(i, j))
    elif mode != "general":
        raise ValueError(f"unknown mode {mode!r}")
    for mask in range(1, 1 << n):
        if mask & (mask - 1) == 0:
            continue
        if mode == "general":
            coeffs = {phi_var(i, mask): 1.0 for i in members_of(mask)}
            for var in coeffs:
                system.declare(var)
            bound = float(report.delta[mask])
        else:
            coeffs = {v_var(i, j): 1.0 for i, j in pairs_of(members_of(mask))}
            bound = float(report.delta[mask]) / 2.0
        system.add_row(f"c1_{mask}", coeffs, bound)
    system.objective = {var: 1.0 for var in system.variables}
    return system


def build_c2_for_partition(partition: Partition) -> ConstraintSystem:
    """Rows ``phi[i, T+i] - phi[i, S(i)] <= 0`` for every other block ``T`` and going alone.

    Singleton cells are the constant 0 and are dropped from rows; rows that
    become ``0 <= 0`` are omitted.
    """
    masks = partition.masks
    system = ConstraintSystem("c2")
    for i in range(partition.n):
        own = next(m for m in masks if m >> i & 1)
        bit = 1 << i
        for T in [*masks, 0]:
            if T == own:
                continue
            coeffs: dict[str, float] = {}
            if T | bit != bit:
                coeffs[phi_var(i, T | bit)] = 1.0
            if own != bit:
                coeffs[phi_var(i, own)] = -1.0
            if not coeffs:
                continue
            for var in coeffs:
                system.declare(var)
            system.add_row(f"c2_{i}_{T}", coeffs, 0.0)
    return system


@dataclass(frozen=True)
class StableSetResult:
    status: Literal["member_found", "infeasible_at_cap"]
    allocation: AllocationTable | MutualGainVector | None = None
    certified_partition: Partition | None = None
    objective_value: float | None = None
    partitions_tried: int = 0
    problem: LpProblem | None = None
    solution: LpSolution | None = None

    def __post_init__(self) -> None:
        if self.status == "member_found" and (
            self.allocation is None or self.certified_partition is None
        ):
            raise ValueError("a member needs an allocation and a certified partition")


def _snap_to_partition(values: np.ndarray, masks: tuple[int, ...], n: int) -> None:
    """Remove round-off so the stability rows hold exactly.

    Own-coalition cells within tolerance of 0 are lifted to 0, then each
    deviation cell is capped at the own-coalition cell. Both moves keep the
    budget rows within tolerance.
    """
    for i in range(n):
        own = next(m for m in masks if m >> i & 1)
        bit = 1 << i
        if own != bit and values[i, own] < 0:
            values[i, own] = 0.0
        for T in masks:
            if T != own:
                values[i, T | bit] = min(values[i, T | bit], values[i, own])


def find_general_allocation(report: GainReport, alpha: float = 1.0) -> StableSetResult:
    """First partition (enumeration order) whose budget + stability LP is feasible.

    The returned table maximizes the sum of clustering gains for that
    partition. Cells that appear in no constraint are filled with
    ``SENTINEL * alpha`` so no unexamined move becomes attractive.
    """
    n = report.n
    if n > GENERAL_CAP:
        raise CapacityError(f"general allocation search requires n <= {GENERAL_CAP}")
    c1 = build_c1(report, "general")
    tried = 0
    for masks in iter_partition_masks(n):
        tried += 1
        partition = Partition.from_masks(masks, n)
        system = c1.extend(build_c2_for_partition(partition))
        system.objective = {var: 1.0 for var in system.variables}
        problem = system.to_problem()
        solution = solve(problem)
        if solution.status == "infeasible":
            continue
        if solution.status != "optimal":
            raise LpSolverError(f"LP for partition {partition!r} is {solution.status}")
        assigned = dict(zip(system.variables, solution.x.tolist()))
        values = np.full((n, 1 << n), np.nan)
        for i in range(n):
            for mask in range(1 << n):
                if mask >> i & 1:
                    if mask == 1 << i:
                        values[i, mask] = 0.0
                    else:
                        values[i, mask] = assigned.get(phi_var(i, mask), SENTINEL * alpha)
        _snap_to_partition(values, masks, n)
        table = AllocationTable(n, values)
        if not check_nash_stable(partition, table).stable:
            raise LpSolverError(f"LP solution for {partition!r} failed the stability check")
        return StableSetResult(
            "member_found", table, partition, solution.objective, tried, problem, solution
        )
    return StableSetResult("infeasible_at_cap", partitions_tried=tried)


def solve_symmetric_lp(report: GainReport) -> StableSetResult:
    """Maximize the total pair gain subject to the symmetric budget rows."""
    n = report.n
    if n < 2:
        raise ValueError("the symmetric LP needs at least two agents")
    system = build_c1(report, "symmetric")
    problem = system.to_problem()
    solution = solve(problem)
    if solution.status != "optimal":
        raise LpSolverError(f"symmetric LP is {solution.status}")
    v = MutualGainVector(n, solution.x.copy())
    partition = first_stable_partition(v)
    return StableSetResult(
        "member_found", v, partition, solution.objective, 1, problem, solution
    )


def first_stable_partition(v: MutualGainVector) -> Partition:
    """A Nash-stable partition for symmetric gains.

    Uses the exhaustive oracle within its cap, best-reply dynamics beyond it.
    """
    if v.n <= ORACLE_CAP:
        rows = phi_from_v(v).values.tolist()
        for masks in iter_partition_masks(v.n):
            if not has_deviation(rows, masks):
                return Partition.from_masks(masks, v.n)
        raise LpSolverError("no Nash-stable partition for symmetric gains")
    trace = run_dynamics(tuple(range(v.n)), v, max_steps=10 * v.n**3)
    return partition_of(trace.terminal)


def budget_violations(phi: AllocationTable, report: GainReport) -> list[Coalition]:
    """Coalitions whose budget row is violated by more than the tolerance."""
    n = phi.n
    out = []
    for mask in range(1, 1 << n):
        if mask & (mask - 1) == 0:
            continue
        total = sum(phi.values[i, mask] for i in members_of(mask))
        if total > report.delta[mask] + FEAS_TOL:
            out.append(Coalition(mask, n))
    return out


def membership_check(phi: AllocationTable | MutualGainVector, report: GainReport) -> bool:
    """Budget rows hold within tolerance and some partition is Nash-stable."""
    if isinstance(phi, MutualGainVector):
        phi = phi_from_v(phi)
    if phi.n > ORACLE_CAP:
        raise CapacityError(f"membership check requires n <= {ORACLE_CAP}")
    if phi.n != report.n:
        raise ValueError("allocation and report disagree on n")
    if budget_violations(phi, report):
        return False
    rows = phi.values.tolist()
    return any(not has_deviation(rows, masks) for masks in iter_partition_masks(phi.n))


def certificate_ok(result: StableSetResult) -> bool:
    return result.problem is not None and result.solution is not None and verify(
        result.problem, result.solution
    )
