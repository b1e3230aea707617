"""Isotropic elasticity and phase-field driven degradation of the stiffness."""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools
from typing import Callable

import numpy as np

_versions = itertools.count()


@dataclass(frozen=True)
class IsotropicElastic:
    lam: float
    mu: float
    rho: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"shear modulus must be positive (mu={self.mu})")
        if not 2 * self.mu + self.dim * self.lam > 0:
            raise ValueError(
                f"2*mu + {self.dim}*lambda must be positive (got {2 * self.mu + self.dim * self.lam})")
        if not self.rho > 0:
            raise ValueError(f"density must be positive (rho={self.rho})")

    @property
    def c_p(self) -> float:
        return float(np.sqrt((2 * self.mu + self.lam) / self.rho))

    @property
    def c_s(self) -> float:
        return float(np.sqrt(self.mu / self.rho))

    def scaled(self, factor: float) -> "IsotropicElastic":
        return IsotropicElastic(factor * self.lam, factor * self.mu, self.rho, self.dim)


def apply_stiffness(mat, strain: np.ndarray) -> np.ndarray:
    """2 mu eps + lambda tr(eps) I for (..., d, d) strains."""
    strain = np.asarray(strain, dtype=float)
    d = strain.shape[-1]
    tr = np.trace(strain, axis1=-2, axis2=-1)
    lam, mu = np.asarray(mat.lam), np.asarray(mat.mu)
    return 2 * mu[..., None, None] * strain + (lam * tr)[..., None, None] * np.eye(d)


def apply_compliance(mat, stress: np.ndarray) -> np.ndarray:
    """Exact inverse of `apply_stiffness` in the dimension of `stress`."""
    stress = np.asarray(stress, dtype=float)
    d = stress.shape[-1]
    lam, mu = np.asarray(mat.lam), np.asarray(mat.mu)
    bulk = 2 * mu + d * lam
    if np.any(bulk <= 0):
        raise ValueError("degenerate material: 2*mu + d*lambda <= 0")
    tr = np.trace(stress, axis1=-2, axis2=-1)
    return stress / (2 * mu[..., None, None]) - (lam * tr / (2 * mu * bulk))[..., None, None] * np.eye(d)


def impedances(mat) -> tuple:
    """Compressional and shear impedances sqrt(rho (2 mu + lambda)), sqrt(rho mu)."""
    rho, lam, mu = np.asarray(mat.rho), np.asarray(mat.lam), np.asarray(mat.mu)
    return np.sqrt(rho * (2 * mu + lam)), np.sqrt(rho * mu)


def compliance_voigt(lam, mu) -> np.ndarray:
    """Matrix S with S[c, e] = E_e : C^{-1} E_c for the 2D stress basis.

    The stress basis is E_0 = e1 e1, E_1 = e2 e2, E_2 = e1 e2 + e2 e1, so a
    stored stress (s11, s22, s12) maps to the full tensor without scaling.
    """
    lam, mu = np.asarray(lam, dtype=float), np.asarray(mu, dtype=float)
    beta = lam / (2 * mu * (2 * mu + 2 * lam))
    out = np.zeros(lam.shape + (3, 3))
    inv2mu = 1.0 / (2 * mu)
    out[..., 0, 0] = inv2mu - beta
    out[..., 1, 1] = inv2mu - beta
    out[..., 0, 1] = out[..., 1, 0] = -beta
    out[..., 2, 2] = 2 * inv2mu
    return out


def identity_degradation(s):
    return s


@dataclass(frozen=True)
class DegradedMaterialField:
    """Nodal Lame parameters s_inf C + (1 - s_inf) C_reg on the mesh vertices.

    Values between nodes come from bilinear interpolation, so the field is
    continuous across faces.  Instances are immutable; `version` increases with
    every rebuild and lets callers cache operators.
    """

    base: IsotropicElastic
    reg_factor: float
    nodal_s_inf: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    version: int = field(default_factory=lambda: next(_versions))

    @property
    def rho(self) -> float:
        return self.base.rho

    def at_node(self, i: int) -> IsotropicElastic:
        return IsotropicElastic(float(self.lam[i]), float(self.mu[i]), self.base.rho, self.base.dim)

    def at_cells(self, mesh, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Interpolated (lam, mu) at reference points xi of every cell, shape (nc, m)."""
        from .reference import q1_shape
        val, _ = q1_shape(xi)
        return self.lam[mesh.cells] @ val.T, self.mu[mesh.cells] @ val.T

    def on_faces(self, mesh, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(lam, mu) at face parameters s in [0, 1] along face_vertices, shape (nf, m)."""
        a, b = mesh.face_vertices[:, 0], mesh.face_vertices[:, 1]
        s = np.asarray(s)[None, :]
        lam = (1 - s) * self.lam[a][:, None] + s * self.lam[b][:, None]
        mu = (1 - s) * self.mu[a][:, None] + s * self.mu[b][:, None]
        return lam, mu


def degrade(nodal_s_inf: np.ndarray, base: IsotropicElastic, reg_factor: float = 1e-7,
            g: Callable = identity_degradation) -> DegradedMaterialField:
    """Convex combination of base and regularized stiffness, nodewise.

    Density is not degraded.  `g` is the degradation function of s_inf; only
    the identity is used by the solver.
    """
    s = np.asarray(nodal_s_inf, dtype=float)
    if np.any(s < 0) or np.any(s > 1) or not np.all(np.isfinite(s)):
        raise ValueError("nodal s_inf must lie in [0, 1]")
    if not reg_factor > 0:
        raise ValueError("reg_factor must be positive")
    gs = g(s)
    weight = gs + (1 - gs) * reg_factor
    return DegradedMaterialField(base, reg_factor, s.copy(), weight * base.lam, weight * base.mu)


def undamaged(n_nodes: int, base: IsotropicElastic, reg_factor: float = 1e-7) -> DegradedMaterialField:
    return degrade(np.ones(n_nodes), base, reg_factor)
