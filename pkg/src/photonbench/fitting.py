"""Damped least-squares minimizer used by all the curve fits.

Levenberg-style damping: each step solves

    (J^T J + lam * diag(J^T J)) * delta = -J^T r

blending Gauss-Newton (small lam) with scaled gradient descent (large
lam).  Steps that reduce the cost are accepted and lam relaxes; rejected
steps raise lam and retry.  The accepted-cost sequence is therefore
non-increasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LeastSquaresResult", "least_squares", "numeric_jacobian"]

MAX_ITERATIONS = 200
RELATIVE_TOLERANCE = 1e-8
_LAMBDA_INIT = 1e-3
_LAMBDA_UP = 7.0
_LAMBDA_DOWN = 3.0
_LAMBDA_MAX = 1e12


@dataclass
class LeastSquaresResult:
    params: np.ndarray
    covariance: np.ndarray
    cost: float                  # sum of squared residuals at the solution
    n_iter: int
    converged: bool
    cost_history: list[float]    # accepted costs, non-increasing

    def stderr(self, scale_by_residual: bool = False, n_data: int | None = None) -> np.ndarray:
        """Parameter standard errors from the covariance diagonal.

        With ``scale_by_residual`` the covariance is multiplied by the
        reduced chi-square (for fits of unweighted data with unknown noise
        scale).
        """
        cov = self.covariance
        if scale_by_residual:
            if n_data is None:
                raise ValueError("n_data required to scale by residual variance")
            dof = max(n_data - self.params.size, 1)
            cov = cov * (self.cost / dof)
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def numeric_jacobian(residual, p: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of the residual vector."""
    p = np.asarray(p, dtype=np.float64)
    r0 = np.asarray(residual(p), dtype=np.float64)
    jac = np.empty((r0.size, p.size))
    for j in range(p.size):
        h = rel_step * max(abs(p[j]), 1.0)
        pp = p.copy()
        pp[j] += h
        rp = np.asarray(residual(pp), dtype=np.float64)
        pm = p.copy()
        pm[j] -= h
        rm = np.asarray(residual(pm), dtype=np.float64)
        jac[:, j] = (rp - rm) / (2.0 * h)
    return jac


def _safe_cost(residual, p) -> tuple[np.ndarray, float]:
    r = np.asarray(residual(p), dtype=np.float64)
    if not np.all(np.isfinite(r)):
        return r, np.inf
    return r, float(r @ r)


def least_squares(residual, p0, jacobian=None,
                  max_iter: int = MAX_ITERATIONS,
                  rtol: float = RELATIVE_TOLERANCE) -> LeastSquaresResult:
    """Minimize sum residual(p)^2 from the starting point p0.

    ``residual`` maps parameters to the residual vector; ``jacobian`` (if
    given) returns d residual / d params, otherwise central differences
    are used.  Convergence is declared when an accepted step changes the
    cost by less than ``rtol`` relative.
    """
    p = np.asarray(p0, dtype=np.float64).copy()
    jac_fn = jacobian if jacobian is not None else (lambda q: numeric_jacobian(residual, q))

    r, cost = _safe_cost(residual, p)
    if not np.isfinite(cost):
        raise ValueError("residual is not finite at the starting point")
    history = [cost]
    lam = _LAMBDA_INIT
    converged = False
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        jac = np.asarray(jac_fn(p), dtype=np.float64)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1e-30

        accepted = False
        while lam <= _LAMBDA_MAX:
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                lam *= _LAMBDA_UP
                continue
            r_new, cost_new = _safe_cost(residual, p + delta)
            if cost_new < cost:
                p = p + delta
                improvement = cost - cost_new
                r, cost = r_new, cost_new
                history.append(cost)
                lam = max(lam / _LAMBDA_DOWN, 1e-12)
                accepted = True
                if improvement <= rtol * max(cost, 1e-300):
                    converged = True
                break
            lam *= _LAMBDA_UP
        if not accepted:
            # damping exhausted: local minimum to working precision
            converged = True
            break
        if converged:
            break

    jac = np.asarray(jac_fn(p), dtype=np.float64)
    jtj = jac.T @ jac
    try:
        covariance = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        covariance = np.linalg.pinv(jtj)
    return LeastSquaresResult(params=p, covariance=covariance, cost=cost,
                              n_iter=n_iter, converged=converged,
                              cost_history=history)
