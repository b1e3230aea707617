"""Conforming Q1 phase-field solver, stress-based driving force and crack bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import reference
from .krylov import ConvergenceError, cg, jacobi
from .mesh import Mesh

# Gauss points at which the driving force enters the load
PF_QUAD = reference.tensor_gauss(2)


@dataclass(frozen=True)
class PhaseParams:
    tau_r: float = 0.001
    M_geom: float = 0.01
    l_c: float = 0.0005
    sigma_c: float = 27.0
    s_min: float = 0.01

    def __post_init__(self):
        if not self.tau_r > 0:
            raise ValueError("tau_r must be positive")
        if not self.sigma_c > 0:
            raise ValueError("sigma_c must be positive")
        if self.M_geom < 0 or self.l_c < 0:
            raise ValueError("M_geom and l_c must be non-negative")
        if not self.s_min < 1:
            raise ValueError("s_min must be below 1")


@dataclass
class PhaseState:
    s: np.ndarray
    s_inf: np.ndarray
    elastic: np.ndarray     # nodes of the elastic domain
    t: float = 0.0

    @classmethod
    def intact(cls, n_nodes: int) -> "PhaseState":
        return cls(np.ones(n_nodes), np.ones(n_nodes), np.ones(n_nodes, dtype=bool))

    @property
    def cracked(self) -> np.ndarray:
        return ~self.elastic

    def copy(self) -> "PhaseState":
        return PhaseState(self.s.copy(), self.s_inf.copy(), self.elastic.copy(), self.t)


def max_principal_stress(stress: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of symmetric (..., d, d) stresses."""
    stress = np.asarray(stress, dtype=float)
    if stress.shape[-1] == 2:
        a, b, c = stress[..., 0, 0], stress[..., 1, 1], stress[..., 0, 1]
        return 0.5 * (a + b) + np.sqrt((0.5 * (a - b)) ** 2 + c * c)
    return np.linalg.eigvalsh(stress)[..., -1]


def max_principal_stress_2d(s11, s22, s12, s33=None) -> np.ndarray:
    """Closed form in-plane maximum; with s33 given, the plane-strain 3D maximum."""
    sig = 0.5 * (s11 + s22) + np.sqrt((0.5 * (s11 - s22)) ** 2 + s12 * s12)
    if s33 is not None:
        sig = np.maximum(sig, s33)
    return sig


def elastic_driving_force(stress: np.ndarray, sigma_c: float) -> np.ndarray:
    """max(sigma_I / sigma_c - 1, 0)."""
    if not sigma_c > 0:
        raise ValueError("sigma_c must be positive")
    return np.maximum(max_principal_stress(stress) / sigma_c - 1.0, 0.0)


class PhaseFieldSolver:
    """Implicit Euler for tau_r s' + M_geom((s - 1) - l_c^2 Lap s) = -Y_el, natural BCs."""

    def __init__(self, mesh: Mesh, params: PhaseParams, rtol: float = 1e-10, max_iters: int = 2000):
        self.mesh = mesh
        self.params = params
        self.rtol = rtol
        self.max_iters = max_iters
        pts, w = PF_QUAD
        val, grad = reference.q1_shape(pts)
        _, J, det = mesh.cell_geometry(pts)
        inv = np.linalg.inv(J)
        g = np.einsum("mak,cmkd->cmad", grad, inv)
        self.wdet = det * w                                  # (nc, m)
        self.shape = val                                     # (m, 4)
        Me = np.einsum("cm,ma,mb->cab", self.wdet, val, val)
        Ke = np.einsum("cm,cmad,cmbd->cab", self.wdet, g, g)
        nv = mesh.n_vertices
        rows = np.repeat(mesh.cells, 4, axis=1).ravel()
        cols = np.tile(mesh.cells, (1, 4)).ravel()
        self.mass = sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(nv, nv))
        self.stiffness = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(nv, nv))
        self._systems: dict[float, sp.csr_matrix] = {}

    def system(self, dt: float) -> sp.csr_matrix:
        if dt not in self._systems:
            p = self.params
            self._systems[dt] = (p.tau_r * self.mass
                                 + dt * p.M_geom * (self.mass + p.l_c ** 2 * self.stiffness)).tocsr()
        return self._systems[dt]

    def load(self, y_el: np.ndarray) -> np.ndarray:
        """int Y_el phi_i for driving-force values at the Gauss points, (nc, 4)."""
        contrib = np.einsum("cm,cm,ma->ca", self.wdet, y_el, self.shape)
        return np.bincount(self.mesh.cells.ravel(), contrib.ravel(), minlength=self.mesh.n_vertices)

    def step(self, s_prev: np.ndarray, y_el: np.ndarray, dt: float):
        """Candidate phase field after one implicit Euler step; returns (s, SolveReport)."""
        p = self.params
        A = self.system(dt)
        rhs = p.tau_r * (self.mass @ s_prev) + dt * p.M_geom * self.mass.sum(axis=1).A1 \
            - dt * self.load(y_el)
        s, report = cg(A, rhs, precond=jacobi(A.diagonal()), x0=s_prev,
                       rtol=self.rtol, max_iters=self.max_iters)
        if not report.converged:
            raise ConvergenceError("phase-field CG did not converge", report)
        return s, report


def pf_step(solver: PhaseFieldSolver, prev: PhaseState, y_el: np.ndarray, dt: float) -> np.ndarray:
    return solver.step(prev.s, y_el, dt)[0]


def project_and_track(candidate: np.ndarray, prev: PhaseState, s_min: float,
                      t: float | None = None) -> PhaseState:
    """Clamp the candidate to {0} u [s_min, 1], update s_inf and the elastic domain.

    Nodes that were already at zero stay at zero.
    """
    s = np.minimum(np.asarray(candidate, dtype=float), 1.0)
    s[(s < s_min) | (prev.s == 0.0)] = 0.0
    s_inf = np.minimum(prev.s_inf, s)
    elastic = prev.elastic & (s_inf >= s_min)
    return PhaseState(s, s_inf, elastic, prev.t if t is None else t)
