"""Restarted GMRES, preconditioned CG and the element block-Jacobi preconditioner."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular


@dataclass
class SolveReport:
    iterations: int = 0
    residual: float = 0.0
    converged: bool = False
    history: list[float] = field(default_factory=list)

    def iterations_to(self, rtol: float) -> int | None:
        """First iteration at which the relative residual was <= rtol."""
        for i, r in enumerate(self.history):
            if r <= rtol:
                return i
        return None


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, report: SolveReport):
        super().__init__(f"{message} after {report.iterations} iterations "
                         f"(relative residual {report.residual:.3e})")
        self.report = report


def as_operator(op) -> Callable[[np.ndarray], np.ndarray]:
    if callable(op) and not hasattr(op, "shape"):
        return op
    if hasattr(op, "matvec"):
        return op.matvec
    return lambda x: op @ x


def _identity(x):
    return x


class BlockJacobi:
    """Inverse of the cell-diagonal blocks of a block-sparse operator.

    `blocks` has shape (n_cells, n, n); the unknowns of cell c occupy the slice
    c*n:(c+1)*n.  Blocks are factorized once, at construction.
    """

    def __init__(self, blocks: np.ndarray):
        try:
            self.inverse = np.linalg.inv(blocks)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("singular diagonal block in block-Jacobi") from exc
        self.n_cells, self.block_size, _ = blocks.shape

    def __call__(self, x: np.ndarray) -> np.ndarray:
        y = np.einsum("cij,cj->ci", self.inverse, x.reshape(self.n_cells, self.block_size))
        return y.ravel()


def jacobi(diagonal: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    inv = 1.0 / np.asarray(diagonal, dtype=float)
    return lambda x: inv * x


def gmres(op, rhs: np.ndarray, precond=None, x0: np.ndarray | None = None,
          rtol: float = 1e-10, max_iters: int = 1000, restart: int = 100):
    """Right-preconditioned restarted GMRES.

    Stops when ||rhs - op(x)|| <= rtol * ||rhs||.  With right preconditioning
    the Arnoldi residual is the true residual of the current iterate, so the
    recorded history needs no correction.  Returns (x, SolveReport); failure to
    converge is reported through the flag, not raised.
    """
    A = as_operator(op)
    M = precond or _identity
    rhs = np.asarray(rhs, dtype=float)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs), SolveReport(0, 0.0, True, [0.0])
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - A(x) if x0 is not None else rhs.copy()
    beta = np.linalg.norm(r)
    report = SolveReport(history=[beta / bnorm])
    while beta > rtol * bnorm and report.iterations < max_iters:
        m = min(restart, max_iters - report.iterations)
        V = [r / beta]
        Z = []
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        k = 0
        breakdown = False
        for j in range(m):
            z = M(V[j])
            Z.append(z)
            w = A(z)
            for i in range(j + 1):
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            for i in range(j):
                hi, hk = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * hi + sn[i] * hk
                H[i + 1, j] = -sn[i] * hi + cs[i] * hk
            denom = np.hypot(H[j, j], H[j + 1, j])
            breakdown = H[j + 1, j] == 0.0
            if not breakdown:
                w /= H[j + 1, j]
            cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            k = j + 1
            report.iterations += 1
            report.history.append(abs(g[j + 1]) / bnorm)
            if abs(g[j + 1]) <= rtol * bnorm or breakdown or report.iterations >= max_iters:
                break
            V.append(w)
        y = solve_triangular(H[:k, :k], g[:k])
        x += np.asarray(Z).T @ y
        r = rhs - A(x)
        beta = np.linalg.norm(r)
        report.history[-1] = beta / bnorm
        if breakdown:
            break  # Krylov space exhausted; restarting cannot help
    report.residual = beta / bnorm
    report.converged = bool(beta <= rtol * bnorm)
    return x, report


def cg(op, rhs: np.ndarray, precond=None, x0: np.ndarray | None = None,
       rtol: float = 1e-10, max_iters: int = 1000):
    """Preconditioned conjugate gradients for symmetric positive definite `op`."""
    A = as_operator(op)
    M = precond or _identity
    rhs = np.asarray(rhs, dtype=float)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs), SolveReport(0, 0.0, True, [0.0])
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - A(x)
    report = SolveReport(history=[np.linalg.norm(r) / bnorm])
    z = M(r)
    p = z.copy()
    rz = r @ z
    while report.history[-1] > rtol and report.iterations < max_iters:
        Ap = A(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        report.iterations += 1
        report.history.append(np.linalg.norm(r) / bnorm)
        z = M(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    report.residual = float(np.linalg.norm(rhs - A(x)) / bnorm)
    report.converged = report.residual <= rtol * (1 + 1e-6) or report.history[-1] <= rtol
    return x, report
