"""Thin exact-solver contract for small mixed binary/continuous programs.

Problems are described as variables plus linear constraints and handed to
HiGHS through :func:`scipy.optimize.milp` with both MIP gaps pinned to zero,
so a returned optimum is exact (up to LP feasibility tolerance) and anything
else surfaces as infeasibility or timeout.  Desk-scale instances (a few
thousand binaries) solve in well under a second.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from .errors import NarrexError, SolverTimeoutError


class MilpInfeasible(NarrexError):
    """The constraint system admits no assignment."""


@dataclass
class MilpProblem:
    """Incrementally built maximization problem."""

    objective: list[float] = field(default_factory=list)
    integrality: list[int] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    _rows: list[dict[int, float]] = field(default_factory=list)
    _row_lb: list[float] = field(default_factory=list)
    _row_ub: list[float] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def add_binary(self, objective: float = 0.0) -> int:
        self.objective.append(objective)
        self.integrality.append(1)
        self.lower.append(0.0)
        self.upper.append(1.0)
        return self.num_vars - 1

    def add_continuous(self, lb: float, ub: float, objective: float = 0.0) -> int:
        self.objective.append(objective)
        self.integrality.append(0)
        self.lower.append(lb)
        self.upper.append(ub)
        return self.num_vars - 1

    def add_constraint(self, coeffs: dict[int, float],
                       lb: float = -np.inf, ub: float = np.inf) -> None:
        self._rows.append(coeffs)
        self._row_lb.append(lb)
        self._row_ub.append(ub)


@dataclass
class MilpResult:
    values: np.ndarray
    objective_value: float
    optimal: bool
    status: str


def solve_milp(problem: MilpProblem, time_limit: float = 60.0) -> MilpResult:
    """Solve to proven optimality or raise.

    Raises :class:`MilpInfeasible` when no assignment exists and
    :class:`SolverTimeoutError` when the budget runs out (carrying the best
    incumbent, flagged non-optimal, when HiGHS found one).  An unbounded
    status is unreachable for well-formed extraction models and is treated
    as an internal error.
    """
    n = problem.num_vars
    if n == 0:
        raise NarrexError("milp problem has no variables")
    c = -np.asarray(problem.objective, dtype=np.float64)  # scipy minimizes
    constraints = []
    if problem._rows:
        data, rows, cols = [], [], []
        for r, coeffs in enumerate(problem._rows):
            for j, a in coeffs.items():
                rows.append(r)
                cols.append(j)
                data.append(a)
        a_mat = sparse.csr_matrix((data, (rows, cols)), shape=(len(problem._rows), n))
        constraints.append(LinearConstraint(a_mat,
                                            np.asarray(problem._row_lb),
                                            np.asarray(problem._row_ub)))
    with warnings.catch_warnings():
        # mip_abs_gap is forwarded to HiGHS verbatim; scipy warns about it
        warnings.simplefilter("ignore", RuntimeWarning)
        res = milp(
            c,
            integrality=np.asarray(problem.integrality),
            bounds=Bounds(np.asarray(problem.lower), np.asarray(problem.upper)),
            constraints=constraints,
            options={"time_limit": float(time_limit), "mip_rel_gap": 0.0, "mip_abs_gap": 0.0},
        )
    if res.status == 0:
        return MilpResult(values=np.asarray(res.x), objective_value=float(-res.fun),
                          optimal=True, status="optimal")
    if res.status == 2:
        raise MilpInfeasible(res.message)
    if res.status == 1:
        incumbent = None
        if res.x is not None:
            incumbent = MilpResult(values=np.asarray(res.x), objective_value=float(-res.fun),
                                   optimal=False, status="timeout-incumbent")
        raise SolverTimeoutError(f"solver hit the {time_limit:g}s budget: {res.message}",
                                 incumbent=incumbent)
    if res.status == 3:
        raise NarrexError(f"internal error: model reported unbounded ({res.message})")
    raise NarrexError(f"solver failure: {res.message}")
