# l1mpc/services/qp_service.py
import logging
from typing import List, Optional

import numpy as np
from scipy import linalg, optimize

from l1mpc.configs import section
from l1mpc.exceptions import (
    InfeasibleProblemError,
    IterationLimitError,
    NonConvexProblemError,
)
from l1mpc.models.mpc import QpSolution, QpSpec

logger = logging.getLogger(__name__)

QP_CONFIG = section("qp")


class ActiveSetSolver:
    """
    Primal active-set method for strictly convex QPs

        min ½ xᵀ H x - fᵀ x   s.t.   G x ≤ h.

    Starts from the unconstrained minimizer when it is feasible, otherwise
    from a phase-one point found by linear programming. Each iteration solves
    the equality-constrained subproblem on the working set with a dense KKT
    factorization.
    """

    def __init__(
        self,
        max_iterations: Optional[int] = None,
        feasibility_tol: float = QP_CONFIG.get("feasibility_tol", 1e-9),
        kkt_tol: float = QP_CONFIG.get("kkt_tol", 1e-6),
    ):
        self.max_iterations = max_iterations
        self.feasibility_tol = float(feasibility_tol)
        self.kkt_tol = float(kkt_tol)

    # --- helpers ---
    def _factor(self, spec: QpSpec):
        try:
            return linalg.cho_factor(spec.hessian)
        except linalg.LinAlgError as e:
            raise NonConvexProblemError(f"QP hessian is not positive definite: {e}")

    def _phase_one(self, spec: QpSpec) -> np.ndarray:
        """Feasible point from min t s.t. G x - t ≤ h, t ≥ -1."""
        G, h = spec.ineq_matrix, spec.ineq_bound
        d, c = spec.dimension, spec.n_constraints
        cost = np.zeros(d + 1)
        cost[-1] = 1.0
        A_ub = np.hstack([G, -np.ones((c, 1))])
        bounds = [(None, None)] * d + [(-1.0, None)]
        result = optimize.linprog(cost, A_ub=A_ub, b_ub=h, bounds=bounds, method="highs")
        if result.status == 2:
            raise InfeasibleProblemError("infeasible")
        if not result.success:
            raise InfeasibleProblemError(f"infeasible: phase one failed ({result.message})")
        violation = float(result.x[-1])
        if violation > self.feasibility_tol:
            raise InfeasibleProblemError("infeasible", violation=violation)
        x = result.x[:d]
        # polish tiny violations left by the LP tolerance
        slack = G @ x - h
        if np.max(slack, initial=0.0) > self.feasibility_tol:
            raise InfeasibleProblemError("infeasible", violation=float(np.max(slack)))
        return x

    def _initial_working_set(self, spec: QpSpec, x: np.ndarray) -> List[int]:
        """Linearly independent subset of the constraints active at x."""
        G, h = spec.ineq_matrix, spec.ineq_bound
        working: List[int] = []
        scale = 1.0 + np.abs(h)
        for i in np.flatnonzero(np.abs(G @ x - h) <= 1e-10 * scale):
            candidate = working + [int(i)]
            if np.linalg.matrix_rank(G[candidate]) == len(candidate):
                working = candidate
        return working

    def _solve_eqp(self, spec: QpSpec, g: np.ndarray, working: List[int]):
        """H p + A_Wᵀ λ = -g, A_W p = 0."""
        d = spec.dimension
        if not working:
            return linalg.cho_solve(self._chol, -g), np.zeros(0)
        A = spec.ineq_matrix[working]
        w = len(working)
        kkt = np.zeros((d + w, d + w))
        kkt[:d, :d] = spec.hessian
        kkt[:d, d:] = A.T
        kkt[d:, :d] = A
        rhs = np.concatenate([-g, np.zeros(w)])
        sol = np.linalg.solve(kkt, rhs)
        return sol[:d], sol[d:]

    def kkt_residual(self, spec: QpSpec, x: np.ndarray, multipliers: np.ndarray) -> float:
        G, h = spec.ineq_matrix, spec.ineq_bound
        stationarity = spec.hessian @ x - spec.linear + G.T @ multipliers
        slack = G @ x - h
        parts = [
            np.max(np.abs(stationarity), initial=0.0),
            np.max(slack, initial=0.0),
            np.max(-multipliers, initial=0.0),
            np.max(np.abs(multipliers * slack), initial=0.0),
        ]
        return float(max(parts))

    def _solution(self, spec, x, working, lam, iterations) -> QpSolution:
        multipliers = np.zeros(spec.n_constraints)
        if working:
            multipliers[working] = lam
        return QpSolution(
            primal=x,
            active_set=sorted(working),
            multipliers=multipliers,
            objective=spec.objective(x),
            kkt_residual=self.kkt_residual(spec, x, multipliers),
            iterations=iterations,
        )

    # --- main loop ---
    def solve(self, spec: QpSpec) -> QpSolution:
        d = spec.dimension
        G, h = spec.ineq_matrix, spec.ineq_bound
        self._chol = self._factor(spec)
        cap = self.max_iterations or 10 * d + 100

        x = linalg.cho_solve(self._chol, spec.linear)
        if spec.n_constraints == 0:
            return self._solution(spec, x, [], np.zeros(0), 0)
        if np.max(G @ x - h) > self.feasibility_tol:
            x = self._phase_one(spec)
        working = self._initial_working_set(spec, x)

        for iteration in range(1, cap + 1):
            g = spec.hessian @ x - spec.linear
            p, lam = self._solve_eqp(spec, g, working)
            if np.linalg.norm(p) <= 1e-10 * (1.0 + np.linalg.norm(x)):
                if lam.size == 0 or np.min(lam) >= -1e-12 * (1.0 + np.max(np.abs(lam))):
                    solution = self._solution(spec, x, working, lam, iteration)
                    if solution.kkt_residual > self.kkt_tol:
                        logger.warning(
                            f"QP KKT residual {solution.kkt_residual:.3g} above {self.kkt_tol:g}"
                        )
                    return solution
                working.pop(int(np.argmin(lam)))
                continue
            # longest step along p keeping the inactive constraints satisfied
            alpha, blocking = 1.0, None
            Gp = G @ p
            slack = h - G @ x
            for i in range(spec.n_constraints):
                if i in working or Gp[i] <= 1e-14:
                    continue
                ratio = max(slack[i], 0.0) / Gp[i]
                if ratio < alpha:
                    alpha, blocking = ratio, i
            x = x + alpha * p
            if blocking is not None:
                working.append(blocking)

        logger.warning(f"active-set solver hit the iteration cap ({cap})")
        multipliers = np.zeros(0)
        best = self._solution(spec, x, [], multipliers, cap)
        raise IterationLimitError(
            f"QP iteration cap {cap} exceeded", best=best
        )


def solve_qp(spec: QpSpec, max_iterations: Optional[int] = None) -> QpSolution:
    return ActiveSetSolver(max_iterations=max_iterations).solve(spec)
