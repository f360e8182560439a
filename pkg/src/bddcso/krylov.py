"""Preconditioned conjugate gradients with a Lanczos condition estimate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import tridiag_eig


class NotSpdOperatorError(ValueError):
    """Raised when an inner product required to be positive is not."""


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    converged: bool
    kappa_estimate: float
    ritz_extremes: tuple

    @property
    def relative_residual(self) -> float:
        if self.residual_history[0] == 0.0:
            return 0.0
        return self.residual_history[-1] / self.residual_history[0]


def pcg(apply_A, apply_B, b, tol: float = 1e-6, max_iters: int = 2000):
    """Solve A x = b with preconditioner B, zero initial guess.

    apply_A, apply_B: callables returning the operator action on a vector.
        A must be SPD, B symmetric positive definite.
    b: right-hand side.
    tol: stop once ||r_k||_2 <= tol * ||b||_2 (recurrence residual).
    max_iters: iteration cap; exceeding it yields a non-converged report,
        not an error.

    Returns (solution, SolveReport). The condition estimate is the ratio of
    the extreme eigenvalues of the Lanczos tridiagonal built from the
    iteration coefficients.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    r = b.copy()
    norm0 = float(np.linalg.norm(r))
    history = [norm0]
    if norm0 == 0.0:
        return x, SolveReport(0, history, True, float("nan"), (float("nan"),) * 2)

    z = apply_B(r)
    rz = float(r @ z)
    if rz <= 0.0:
        raise NotSpdOperatorError(f"preconditioner not SPD: <r, Br> = {rz}")
    p = z.copy()
    alphas, betas = [], []
    converged = False
    for _ in range(max_iters):
        Ap = apply_A(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise NotSpdOperatorError(f"operator not SPD: <p, Ap> = {pAp}")
        alpha = rz / pAp
        alphas.append(alpha)
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
        if rnorm <= tol * norm0:
            converged = True
            break
        z = apply_B(r)
        rz_new = float(r @ z)
        if rz_new <= 0.0:
            raise NotSpdOperatorError(f"preconditioner not SPD: <r, Br> = {rz_new}")
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p

    ritz = _lanczos_extremes(alphas, betas)
    kappa = ritz[1] / ritz[0] if ritz[0] > 0 else float("inf")
    report = SolveReport(
        iterations=len(alphas),
        residual_history=history,
        converged=converged,
        kappa_estimate=kappa,
        ritz_extremes=ritz,
    )
    return x, report


def _lanczos_extremes(alphas, betas):
    """Extreme Ritz values of the preconditioned operator from CG coefficients."""
    k = len(alphas)
    diag = np.empty(k)
    off = np.empty(max(k - 1, 0))
    diag[0] = 1.0 / alphas[0]
    for j in range(1, k):
        diag[j] = 1.0 / alphas[j] + betas[j - 1] / alphas[j - 1]
        off[j - 1] = np.sqrt(betas[j - 1]) / alphas[j - 1]
    return tridiag_eig(diag, off)
