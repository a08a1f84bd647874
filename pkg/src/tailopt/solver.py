#  Copyright (c) Michele De Stefano - 2026.
"""
Nonlinear-program solvers and the multi-start driver.

The built-in solver is a bound-constrained augmented Lagrangian method:
equalities and inequalities go into the Powell-Hestenes-Rockafellar
augmented Lagrangian, bounds are handled directly by the inner L-BFGS-B
solves. Multipliers and penalty follow the usual schedule of feasibility
and optimality tolerances (eta, omega) tightened on success and reset when
the penalty grows.
"""

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from os import PathLike
from typing import Protocol

import numpy as np
import pandas as pd
import scipy.optimize
import scipy.sparse

from .errors import MultiStartError, TailOptError
from .transcription import NlpProblem, Solution, make_solution

logger = logging.getLogger(__name__)

STATUSES: tuple[str, ...] = (
    "optimal",
    "feasible-stalled",
    "infeasible",
    "iteration-limit",
)
FEASIBLE_STATUSES: tuple[str, ...] = ("optimal", "feasible-stalled")

# No point with a larger violation is ever labeled optimal.
OPTIMAL_VIOLATION_CAP: float = 1e-4

N_RANDOM_STARTS: int = 3
# Standard deviation of the random starts, as a fraction of the half range of
# every variable.
RANDOM_START_SPREAD: float = 0.1


class Problem(Protocol):
    """
    Interface of the nonlinear programs the solvers accept.
    """

    @property
    def n(self) -> int: ...

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]: ...

    def eval_objective(self, z: np.ndarray) -> float: ...

    def eval_gradient(self, z: np.ndarray) -> np.ndarray: ...

    def eval_constraints(
        self, z: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]: ...

    def eval_jacobians(self, z: np.ndarray) -> tuple: ...


@dataclass(frozen=True)
class SolverConfig:
    """
    Solver settings.

    Attributes:
        feasibility_tol:    Max-norm of the constraint violation at a
                            converged point.
        optimality_tol:     Max-norm of the projected Lagrangian gradient at a
                            converged point.
        max_iter:           Total budget of inner iterations.
        max_inner_iter:     Budget of a single bound-constrained solve.
        max_outer_iter:     Budget of multiplier/penalty updates.
        penalty_init:       Initial penalty parameter.
        penalty_growth:     Factor applied to the penalty when the violation
                            is not reduced enough.
        penalty_max:        Upper bound of the penalty parameter.
        violation_reduction: Required reduction factor of the violation
                            between two multiplier updates.
        lbfgs_memory:       Correction pairs kept by L-BFGS-B.
        line_search_steps:  Max line-search steps per inner iteration.
        backend:            "auglag" (built-in) or "trust-constr" (scipy).
        diagnostics_path:   Optional per-iteration CSV written by solve.
    """

    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-6
    max_iter: int = 3000
    max_inner_iter: int = 500
    max_outer_iter: int = 30
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    penalty_max: float = 1e8
    violation_reduction: float = 0.25
    lbfgs_memory: int = 20
    line_search_steps: int = 40
    backend: str = "auglag"
    diagnostics_path: str | PathLike | None = None

    def __post_init__(self) -> None:
        for name in (
            "feasibility_tol",
            "optimality_tol",
            "penalty_init",
            "penalty_max",
        ):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.penalty_growth <= 1.0:
            raise ValueError("penalty_growth must be greater than 1")
        if not 0.0 < self.violation_reduction < 1.0:
            raise ValueError("violation_reduction must be in (0, 1)")
        if min(self.max_iter, self.max_inner_iter, self.max_outer_iter) < 1:
            raise ValueError("iteration budgets must be positive")
        if self.backend not in ("auglag", "trust-constr"):
            raise ValueError(f"unknown solver backend {self.backend!r}")


@dataclass
class SolveResult:
    """
    Outcome of a solve on a generic Problem.

    Attributes:
        z:              Best iterate.
        status:         One of STATUSES.
        objective:      Objective at z.
        violation:      Constraint violation (max-norm) at z.
        kkt_residual:   Projected Lagrangian gradient (max-norm) at z.
        iterations:     Inner iterations taken.
        merit_history:  Augmented Lagrangian values accepted by every inner
                        solve (non-increasing within each list).
        diagnostics:    Per outer iteration: iter, objective, feasibility,
                        step_length.
    """

    z: np.ndarray
    status: str
    objective: float
    violation: float
    kkt_residual: float
    iterations: int
    merit_history: list[list[float]] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)


def violation(problem: Problem, z: np.ndarray) -> float:
    c_eq, c_ineq = problem.eval_constraints(z)
    lb, ub = problem.bounds
    parts = [
        np.abs(c_eq),
        np.maximum(c_ineq, 0.0),
        np.maximum(lb - z, 0.0),
        np.maximum(z - ub, 0.0),
    ]
    return float(max(np.max(p, initial=0.0) for p in parts))


def projected_gradient(
    z: np.ndarray, gradient: np.ndarray, lb: np.ndarray, ub: np.ndarray
) -> float:
    """
    Max-norm of the gradient projected on the box [lb, ub].
    """
    return float(np.max(np.abs(np.clip(z - gradient, lb, ub) - z), initial=0.0))


def _label(
    feasible: bool, stationary: bool, budget_exhausted: bool, viol: float
) -> str:
    if feasible and stationary and viol <= OPTIMAL_VIOLATION_CAP:
        return "optimal"
    if feasible:
        return "feasible-stalled"
    if budget_exhausted:
        return "iteration-limit"
    return "infeasible"


class AugmentedLagrangianSolver:
    """
    Built-in solver for problems of the form

        min f(z)  s.t.  c_eq(z) = 0,  c_ineq(z) <= 0,  lb <= z <= ub.
    """

    config: SolverConfig
    log: bool

    def __init__(self, config: SolverConfig | None = None, log: bool = False):
        """
        Constructor.

        Args:
            config: Solver settings.
            log:    Put this to True to log every outer iteration at INFO
                    level (DEBUG otherwise).
        """
        self.config = config or SolverConfig()
        self.log = log

    def __log(self, message: str) -> None:
        logger.log(logging.INFO if self.log else logging.DEBUG, message)

    def minimize(self, problem: Problem, z0: np.ndarray) -> SolveResult:
        """
        Solves the problem from z0 (projected on the bounds first).

        Returns:
            The best iterate found: the least-violating one until a point
            within the feasibility tolerance is found, then the feasible one
            with the lowest objective.

        Raises:
            NonFiniteError: If an evaluation produces NaN or Inf (the error
                            carries the iterate).
        """
        cfg = self.config
        lb, ub = problem.bounds
        z = np.clip(np.asarray(z0, dtype=float), lb, ub)
        c_eq, c_ineq = problem.eval_constraints(z)
        lam = np.zeros_like(c_eq)
        mu = np.zeros_like(c_ineq)
        rho = cfg.penalty_init
        omega = 1.0 / rho
        eta = rho**-0.1

        def merit(x: np.ndarray) -> tuple[float, np.ndarray]:
            f = problem.eval_objective(x)
            g = problem.eval_gradient(x)
            ce, ci = problem.eval_constraints(x)
            J_eq, J_ineq = problem.eval_jacobians(x)
            shifted = np.maximum(mu + rho * ci, 0.0)
            value = (
                f
                + lam @ ce
                + 0.5 * rho * ce @ ce
                + (shifted @ shifted - mu @ mu) / (2.0 * rho)
            )
            grad = g + J_eq.T @ (lam + rho * ce) + J_ineq.T @ shifted
            return float(value), grad

        best = self.__candidate(problem, z, lam, mu)
        iterations = 0
        history: list[list[float]] = []
        diagnostics: list[dict] = []
        reference_violation = best["violation"]
        stalled_updates = 0
        converged = False

        for outer in range(cfg.max_outer_iter):
            budget = min(cfg.max_inner_iter, cfg.max_iter - iterations)
            if budget <= 0:
                break
            accepted: list[float] = []
            result = scipy.optimize.minimize(
                merit,
                z,
                jac=True,
                method="L-BFGS-B",
                bounds=scipy.optimize.Bounds(lb, ub),
                callback=lambda intermediate_result: accepted.append(
                    float(intermediate_result.fun)
                ),
                options={
                    "maxiter": budget,
                    "gtol": omega,
                    "ftol": 1e3 * np.finfo(float).eps,
                    "maxcor": cfg.lbfgs_memory,
                    "maxls": cfg.line_search_steps,
                },
            )
            step = float(np.max(np.abs(result.x - z), initial=0.0))
            z = result.x
            iterations += int(result.nit)
            history.append(accepted)

            c_eq, c_ineq = problem.eval_constraints(z)
            # Violation measure used by the multiplier schedule: inequality
            # values are capped by how much the multiplier lets them relax.
            measure = max(
                float(np.max(np.abs(c_eq), initial=0.0)),
                float(
                    np.max(np.abs(np.maximum(c_ineq, -mu / rho)), initial=0.0)
                ),
            )
            candidate = self.__candidate(
                problem, z, lam + rho * c_eq, np.maximum(mu + rho * c_ineq, 0.0)
            )
            best = self.__better(best, candidate, cfg.feasibility_tol)
            diagnostics.append(
                {
                    "iter": iterations,
                    "objective": candidate["objective"],
                    "feasibility": candidate["violation"],
                    "step_length": step,
                }
            )
            self.__log(
                f"AL {outer:3d}: f = {candidate['objective']:.6e}, "
                f"viol = {candidate['violation']:.2e}, "
                f"kkt = {candidate['kkt']:.2e}, rho = {rho:.1e}, "
                f"inner = {result.nit}"
            )

            if (
                candidate["violation"] <= cfg.feasibility_tol
                and candidate["kkt"] <= cfg.optimality_tol
            ):
                converged = True
                break

            if measure <= max(eta, cfg.feasibility_tol):
                lam = lam + rho * c_eq
                mu = np.maximum(mu + rho * c_ineq, 0.0)
                eta = max(eta / rho**0.9, 0.1 * cfg.feasibility_tol)
                omega = max(omega / rho, 0.1 * cfg.optimality_tol)
                reference_violation = measure
                stalled_updates = 0
            else:
                required = 1.0 - cfg.violation_reduction
                if measure > required * reference_violation:
                    stalled_updates += 1
                else:
                    reference_violation = measure
                    stalled_updates = 0
                if rho >= cfg.penalty_max or stalled_updates >= 10:
                    self.__log("Violation is not decreasing, stopping")
                    break
                rho = min(rho * cfg.penalty_growth, cfg.penalty_max)
                eta = rho**-0.1
                omega = 1.0 / rho

        status = _label(
            feasible=best["violation"] <= cfg.feasibility_tol,
            stationary=converged or best["kkt"] <= cfg.optimality_tol,
            budget_exhausted=iterations >= cfg.max_iter,
            viol=best["violation"],
        )
        out = SolveResult(
            z=best["z"],
            status=status,
            objective=best["objective"],
            violation=best["violation"],
            kkt_residual=best["kkt"],
            iterations=iterations,
            merit_history=history,
            diagnostics=diagnostics,
        )
        _write_diagnostics(cfg, diagnostics)
        return out

    def solve(self, nlp: NlpProblem, z0: np.ndarray) -> Solution:
        """
        Solves a transcribed problem and wraps the result in a Solution.
        """
        return _to_solution(nlp, self.minimize(nlp, z0))

    def __candidate(
        self, problem: Problem, z: np.ndarray, lam: np.ndarray, mu: np.ndarray
    ) -> dict:
        lb, ub = problem.bounds
        J_eq, J_ineq = problem.eval_jacobians(z)
        grad_lagrangian = (
            problem.eval_gradient(z) + J_eq.T @ lam + J_ineq.T @ mu
        )
        return {
            "z": z.copy(),
            "objective": problem.eval_objective(z),
            "violation": violation(problem, z),
            "kkt": projected_gradient(z, grad_lagrangian, lb, ub),
        }

    @staticmethod
    def __better(
        current: dict, candidate: dict, feasibility_tol: float
    ) -> dict:
        current_ok = current["violation"] <= feasibility_tol
        candidate_ok = candidate["violation"] <= feasibility_tol
        if candidate_ok and current_ok:
            if candidate["objective"] <= current["objective"]:
                return candidate
            return current
        if candidate_ok:
            return candidate
        if current_ok:
            return current
        if candidate["violation"] <= current["violation"]:
            return candidate
        return current


class ScipyTrustConstrSolver:
    """
    Same interface as AugmentedLagrangianSolver, backed by scipy's
    trust-region interior-point method. Variables with equal bounds are
    removed from the problem before the call.
    """

    config: SolverConfig
    log: bool

    def __init__(self, config: SolverConfig | None = None, log: bool = False):
        self.config = config or SolverConfig()
        self.log = log

    def minimize(self, problem: Problem, z0: np.ndarray) -> SolveResult:
        cfg = self.config
        lb, ub = problem.bounds
        z_full = np.clip(np.asarray(z0, dtype=float), lb, ub)
        free = lb < ub
        fixed_values = z_full.copy()

        def expand(y: np.ndarray) -> np.ndarray:
            z = fixed_values.copy()
            z[free] = y
            return z

        def objective(y: np.ndarray) -> float:
            return problem.eval_objective(expand(y))

        def gradient(y: np.ndarray) -> np.ndarray:
            return problem.eval_gradient(expand(y))[free]

        def equalities(y: np.ndarray) -> np.ndarray:
            return problem.eval_constraints(expand(y))[0]

        def inequalities(y: np.ndarray) -> np.ndarray:
            return problem.eval_constraints(expand(y))[1]

        def jac_eq(y: np.ndarray) -> scipy.sparse.csr_array:
            return scipy.sparse.csr_array(problem.eval_jacobians(expand(y))[0])[
                :, free
            ]

        def jac_ineq(y: np.ndarray) -> scipy.sparse.csr_array:
            return scipy.sparse.csr_array(problem.eval_jacobians(expand(y))[1])[
                :, free
            ]

        c_eq, c_ineq = problem.eval_constraints(z_full)
        constraints = []
        if c_eq.size:
            constraints.append(
                scipy.optimize.NonlinearConstraint(
                    equalities,
                    0.0,
                    0.0,
                    jac=jac_eq,
                    hess=scipy.optimize.BFGS(),
                )
            )
        if c_ineq.size:
            constraints.append(
                scipy.optimize.NonlinearConstraint(
                    inequalities,
                    -np.inf,
                    0.0,
                    jac=jac_ineq,
                    hess=scipy.optimize.BFGS(),
                )
            )
        result = scipy.optimize.minimize(
            objective,
            z_full[free],
            jac=gradient,
            hess=scipy.optimize.BFGS(),
            method="trust-constr",
            bounds=scipy.optimize.Bounds(lb[free], ub[free]),
            constraints=constraints,
            options={
                "maxiter": cfg.max_iter,
                "gtol": cfg.optimality_tol,
                "xtol": 1e-12,
                "verbose": 2 if self.log else 0,
            },
        )
        z = expand(result.x)
        viol = violation(problem, z)
        status = _label(
            feasible=viol <= cfg.feasibility_tol,
            stationary=result.status == 1,
            budget_exhausted=result.status == 0,
            viol=viol,
        )
        diagnostics = [
            {
                "iter": int(result.nit),
                "objective": float(result.fun),
                "feasibility": viol,
                "step_length": float(result.tr_radius),
            }
        ]
        _write_diagnostics(cfg, diagnostics)
        return SolveResult(
            z=z,
            status=status,
            objective=problem.eval_objective(z),
            violation=viol,
            kkt_residual=float(result.optimality),
            iterations=int(result.nit),
            diagnostics=diagnostics,
        )

    def solve(self, nlp: NlpProblem, z0: np.ndarray) -> Solution:
        return _to_solution(nlp, self.minimize(nlp, z0))


NlpSolver = AugmentedLagrangianSolver | ScipyTrustConstrSolver


def make_solver(
    config: SolverConfig | None = None, log: bool = False
) -> NlpSolver:
    config = config or SolverConfig()
    if config.backend == "trust-constr":
        return ScipyTrustConstrSolver(config, log=log)
    return AugmentedLagrangianSolver(config, log=log)


def _to_solution(nlp: NlpProblem, result: SolveResult) -> Solution:
    return make_solution(
        nlp,
        result.z,
        status=result.status,
        iterations=result.iterations,
        kkt_residual=result.kkt_residual,
    )


def _write_diagnostics(config: SolverConfig, diagnostics: list[dict]) -> None:
    if config.diagnostics_path is None:
        return
    pd.DataFrame(
        diagnostics, columns=["iter", "objective", "feasibility", "step_length"]
    ).to_csv(config.diagnostics_path, index=False)


def solve(
    nlp: NlpProblem, init: np.ndarray, config: SolverConfig | None = None
) -> Solution:
    """
    Solves a transcribed problem from one initial point.

    Args:
        nlp:    The problem.
        init:   Initial decision vector (projected on the bounds).
        config: Solver settings.

    Returns:
        The best iterate as a Solution, with status one of STATUSES.
    """
    init = np.asarray(init, dtype=float)
    if init.shape != (nlp.n,):
        raise ValueError(
            f"initial point must have shape ({nlp.n},), got {init.shape}"
        )
    return make_solver(config).solve(nlp, init)


def init_strategies(nlp: NlpProblem, seed: int) -> list[tuple[str, np.ndarray]]:
    """
    The five initial points of a multi-start solve: all zeros, straight line
    in state space from rest to the final target orientation, and three
    seeded random points. In variable mode the lengths start uniform.

    Args:
        nlp:    The problem.
        seed:   Seed of the random starts; start i uses the stream
                (seed, i).

    Returns:
        (name, decision vector) pairs, all within the variable bounds.
    """
    model = nlp.model
    grid = nlp.grid
    lb, ub = nlp.bounds
    N = grid.n_intervals
    n_q = model.n_q
    uniform_lengths = [model.total_length / model.n_links] * model.n_links

    zero_states = np.zeros((N + 1, nlp.n_x))
    zero_controls = np.zeros((2 * N + 1, nlp.n_u))
    starts = [
        ("zeros", nlp.pack(zero_states, zero_controls, uniform_lengths))
    ]

    final = nlp.target.evaluate(grid.tf)[0]
    line = np.zeros((N + 1, nlp.n_x))
    line[:, :3] = np.outer(np.arange(N + 1) / N, final)
    line[1:, n_q : n_q + 3] = final / (grid.tf - grid.t0)
    starts.append(
        ("straight_line", nlp.pack(line, zero_controls, uniform_lengths))
    )

    half_range = 0.5 * (ub - lb)
    center = 0.5 * (ub + lb)
    for i in range(N_RANDOM_STARTS):
        rng = np.random.default_rng([seed, i])
        z = center + RANDOM_START_SPREAD * half_range * rng.standard_normal(
            nlp.n
        )
        if nlp.n_lengths:
            z[-nlp.n_lengths :] = uniform_lengths
        starts.append((f"random_{i}", z))

    return [(name, np.clip(z, lb, ub)) for name, z in starts]


def multistart_solve(
    nlp: NlpProblem,
    seed: int,
    config: SolverConfig | None = None,
    warm_start: np.ndarray | None = None,
    solver: NlpSolver | None = None,
    on_start: Callable[[str, Solution], None] | None = None,
) -> Solution:
    """
    Solves from every initial strategy and keeps the feasible solution with
    the lowest objective.

    Args:
        nlp:        The problem.
        seed:       Seed of the random starts.
        config:     Solver settings.
        warm_start: Optional extra initial point (e.g. the uniform-length
                    solution of the same trial, for variable mode).
        solver:     Solver instance. Defaults to make_solver(config).
        on_start:   Optional callback invoked after every start.

    Returns:
        The best solution; its starts attribute records every outcome.

    Raises:
        MultiStartError:    If no start ends feasible.
    """
    solver = solver or make_solver(config)
    starts = init_strategies(nlp, seed)
    if warm_start is not None:
        lb, ub = nlp.bounds
        starts.append(("warm_start", np.clip(warm_start, lb, ub)))

    best: Solution | None = None
    outcomes: list[dict] = []
    for name, z0 in starts:
        started = time.perf_counter()
        try:
            solution = solver.solve(nlp, z0)
        except TailOptError as e:
            logger.warning(f"Start {name} failed: {e}")
            outcomes.append(
                {
                    "start": name,
                    "status": "error",
                    "objective": math.nan,
                    "constraint_violation": math.nan,
                    "iterations": 0,
                    "wall_time_s": time.perf_counter() - started,
                    "error": str(e),
                }
            )
            continue
        outcomes.append(
            {
                "start": name,
                "status": solution.status,
                "objective": solution.objective,
                "constraint_violation": solution.constraint_violation,
                "iterations": solution.iterations,
                "wall_time_s": time.perf_counter() - started,
                "error": "",
            }
        )
        logger.info(
            f"Start {name}: {solution.status}, objective "
            f"{solution.objective:.6g}"
        )
        if on_start is not None:
            on_start(name, solution)
        if solution.status in FEASIBLE_STATUSES and (
            best is None or solution.objective < best.objective
        ):
            best = solution

    if best is None:
        raise MultiStartError(
            f"none of the {len(starts)} starts ended feasible", outcomes
        )
    return replace(best, starts=outcomes)
