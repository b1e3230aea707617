"""Discontinuous Galerkin discretization of the velocity-stress system.

Unknowns per cell are the nodal values of (v1, v2, s11, s22, s12) on a
tensor-product Gauss-Lobatto grid of degree k.  The mass operator and the
full-upwind operator are assembled once per material state into block-sparse
matrices: the cell-diagonal blocks are kept separately (they are also the
block-Jacobi blocks) and each interior face adds two off-diagonal blocks.
Face terms are computed face by face and scattered into both neighbours during
assembly, so the operator application itself is a plain sparse product.

Boundary conventions (ghost states):
  * traction faces (neumann/free): [v] = 0, [s]n = 2 (g - s n)
  * velocity faces (dirichlet):    [v] = 2 (v_D - v), [s]n = 0
  * slip faces: normal velocity and shear traction vanish.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import reference
from .krylov import BlockJacobi, ConvergenceError, gmres
from .material import DegradedMaterialField, compliance_voigt
from .mesh import LEFT, RIGHT, Mesh, Tag

N_FIELDS = 5
VELOCITY = (0, 1)
STRESS = (2, 3, 4)
# stress basis E_0 = e1 e1, E_1 = e2 e2, E_2 = e1 e2 + e2 e1
STRESS_BASIS = np.array([[[1.0, 0.0], [0.0, 0.0]],
                         [[0.0, 0.0], [0.0, 1.0]],
                         [[0.0, 1.0], [1.0, 0.0]]])


class DGSpace:
    """Discontinuous Q_k space for velocity and symmetric stress on a 2D mesh."""

    def __init__(self, mesh: Mesh, degree: int = 1):
        if degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        self.mesh = mesh
        self.degree = degree
        self.n_nodes = (degree + 1) ** 2
        self.block_size = N_FIELDS * self.n_nodes
        self.dim = mesh.n_cells * self.block_size

        self.q_ref, self.q_w = reference.tensor_gauss(degree + 1)
        self.B, dB = reference.tensor_basis(degree, self.q_ref)
        self.q_x, J, det = mesh.cell_geometry(self.q_ref)
        inv = np.linalg.inv(J)
        # physical gradients (nc, m, nb, 2)
        self.grad = np.einsum("mak,cmkd->cmad", dB, inv)
        self.wdet = det * self.q_w

        s, w = reference.gauss(degree + 1)
        self.face_s = 0.5 * (s + 1)
        self.face_w = 0.5 * w
        # trace[e, o]: basis on local edge e at parameter s (o=0) or 1-s (o=1)
        self.trace = np.empty((4, 2, len(s), self.n_nodes))
        for e in range(4):
            for o, par in enumerate((self.face_s, 1 - self.face_s)):
                self.trace[e, o] = reference.tensor_basis(degree, reference.edge_points(e, par))[0]
        a, b = mesh.vertices[mesh.face_vertices[:, 0]], mesh.vertices[mesh.face_vertices[:, 1]]
        self.face_x = a[:, None, :] + self.face_s[None, :, None] * (b - a)[:, None, :]

        self.node_ref = np.column_stack([
            np.tile(reference.gauss_lobatto(degree + 1), degree + 1),
            np.repeat(reference.gauss_lobatto(degree + 1), degree + 1)])

    def zeros(self) -> np.ndarray:
        return np.zeros(self.dim)

    def index(self, cell: int, field: int, node: int) -> int:
        return (cell * N_FIELDS + field) * self.n_nodes + node

    def cell_slice(self, cell: int) -> slice:
        return slice(cell * self.block_size, (cell + 1) * self.block_size)

    def interpolate(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Nodal interpolant of fn(x) -> (..., 5) given at physical points (..., 2)."""
        x, _, _ = self.mesh.cell_geometry(self.node_ref)
        vals = np.asarray(fn(x))                       # (nc, nb, 5)
        return np.ascontiguousarray(vals.transpose(0, 2, 1)).ravel()

    def evaluate(self, y: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Field values at reference points xi of every cell, shape (nc, m, 5)."""
        val, _ = reference.tensor_basis(self.degree, np.atleast_2d(xi))
        return np.einsum("ma,cfa->cmf", val, y.reshape(-1, N_FIELDS, self.n_nodes))

    def velocity_part(self, y: np.ndarray) -> np.ndarray:
        return y.reshape(-1, N_FIELDS, self.n_nodes)[:, :2, :]


@dataclass
class DGState:
    """Coefficient vector of (v, s) over a DGSpace at time t."""

    values: np.ndarray
    t: float = 0.0

    def copy(self) -> "DGState":
        return DGState(self.values.copy(), self.t)


def stress_tensor(components: np.ndarray) -> np.ndarray:
    """(..., 3) stored stress -> (..., 2, 2) symmetric tensor."""
    return np.einsum("...c,cij->...ij", components, STRESS_BASIS)


@dataclass(frozen=True)
class BoundaryPulse:
    """Smooth pressure pulses on the two ends of the bar.

    On the image of x1 = -0.5 (x1 = +0.5) the traction is g n with
    g = a(c_P t - S) and a(s) = A exp(-1 / (w^2 - s^2)) inside |s| < w.
    """

    amplitude_minus: float = 0.0
    amplitude_plus: float = 0.0
    width_minus: float = 0.3
    width_plus: float = 0.3
    shift_minus: float = 0.0
    shift_plus: float = 0.0
    t_init: float = 0.24
    c_p: float = 2.0

    @staticmethod
    def bump(s, amplitude: float, width: float):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = np.abs(s) < width
        out[inside] = amplitude * np.exp(-1.0 / (width ** 2 - s[inside] ** 2))
        return out

    def value(self, t: float, side: int) -> float:
        if t >= self.t_init or t < 0:
            return 0.0
        if side == LEFT:
            return float(self.bump(self.c_p * t - self.shift_minus, self.amplitude_minus, self.width_minus))
        if side == RIGHT:
            return float(self.bump(self.c_p * t - self.shift_plus, self.amplitude_plus, self.width_plus))
        return 0.0

    def traction(self, x: np.ndarray, t: float, normal: np.ndarray, side: np.ndarray) -> np.ndarray:
        g = np.array([self.value(t, s) for s in np.atleast_1d(side)])
        return np.broadcast_to((g[:, None] * normal)[:, None, :], x.shape).copy()

    def is_active(self, t: float) -> bool:
        return self.value(t, LEFT) != 0.0 or self.value(t, RIGHT) != 0.0


def _face_vectors(normal: np.ndarray):
    """Coefficient rows (nf, 5) for n.v, t.v, n.sn and t.sn; t = n rotated by +90 deg."""
    n1, n2 = normal[:, 0], normal[:, 1]
    t1, t2 = -n2, n1
    z = np.zeros_like(n1)
    vn = np.column_stack([n1, n2, z, z, z])
    vt = np.column_stack([t1, t2, z, z, z])
    snn = np.column_stack([z, z, n1 * n1, n2 * n2, 2 * n1 * n2])
    snt = np.column_stack([z, z, t1 * n1, t2 * n2, t1 * n2 + t2 * n1])
    return vn, vt, snn, snt


def _rows(coef: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """(nf, 5) x (nf, m, nb) -> (nf, m, 5*nb) trace functionals on cell unknowns."""
    return np.einsum("fk,fma->fmka", coef, basis).reshape(basis.shape[0], basis.shape[1], -1)


def _outer(weight: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("fm,fmi,fmj->fij", weight, a, b)


class WaveOperator:
    """Mass and full-upwind operators for one material state."""

    def __init__(self, space: DGSpace, field: DegradedMaterialField):
        self.space = space
        self.field = field
        mesh = space.mesh
        nc, n, nb = mesh.n_cells, space.block_size, space.n_nodes
        rho = field.rho

        lam, mu = field.at_cells(mesh, space.q_ref)
        S = compliance_voigt(lam, mu)                           # (nc, m, 3, 3)
        mass = np.zeros((nc, N_FIELDS, N_FIELDS, nb, nb))
        vv = rho * np.einsum("cm,ma,mb->cab", space.wdet, space.B, space.B)
        mass[:, 0, 0] = mass[:, 1, 1] = vv
        mass[:, 2:, 2:] = np.einsum("cm,cmef,ma,mb->cefab", space.wdet, S, space.B, space.B)
        self.mass_blocks = mass.transpose(0, 1, 3, 2, 4).reshape(nc, n, n)

        vol = np.einsum("km,ma,kmbj,cij->kicab", space.wdet, space.B, space.grad, STRESS_BASIS)
        upw = np.zeros((nc, N_FIELDS, N_FIELDS, nb, nb))
        upw[:, 0:2, 2:5] = vol
        upw[:, 2:5, 0:2] = vol.transpose(0, 2, 1, 3, 4)
        diag = upw.transpose(0, 1, 3, 2, 4).reshape(nc, n, n).copy()

        off_rows, off_cols, off_vals = [], [], []
        lam_f, mu_f = field.on_faces(mesh, space.face_s)
        Zp = np.sqrt(rho * (2 * mu_f + lam_f))
        Zs = np.sqrt(rho * mu_f)
        self.face_impedance = (Zp, Zs)
        vn, vt, snn, snt = _face_vectors(mesh.normals)
        W = space.face_w[None, :] * mesh.lengths[:, None]       # full face weights

        fi = mesh.interior_faces
        if len(fi):
            L, R = mesh.face_cells[fi, 0], mesh.face_cells[fi, 1]
            BL = space.trace[mesh.face_local[fi, 0], 0]
            BR = space.trace[mesh.face_local[fi, 1], 1]
            zp, zs, w = Zp[fi][..., None], Zs[fi][..., None], 0.5 * W[fi]
            PL = _rows(snn[fi], BL) + zp * _rows(vn[fi], BL)
            TL = _rows(snt[fi], BL) + zs * _rows(vt[fi], BL)
            PR = _rows(snn[fi], BR) + zp * _rows(vn[fi], BR)
            TR = _rows(snt[fi], BR) + zs * _rows(vt[fi], BR)
            PLm = _rows(snn[fi], BL) - zp * _rows(vn[fi], BL)
            TLm = _rows(snt[fi], BL) - zs * _rows(vt[fi], BL)
            PRm = _rows(snn[fi], BR) - zp * _rows(vn[fi], BR)
            TRm = _rows(snt[fi], BR) - zs * _rows(vt[fi], BR)
            wp, ws = w / Zp[fi], w / Zs[fi]
            np.add.at(diag, L, -_outer(wp, PL, PL) - _outer(ws, TL, TL))
            np.add.at(diag, R, -_outer(wp, PRm, PRm) - _outer(ws, TRm, TRm))
            for rows_c, cols_c, blk in (
                    (L, R, _outer(wp, PL, PR) + _outer(ws, TL, TR)),
                    (R, L, _outer(wp, PRm, PLm) + _outer(ws, TRm, TLm))):
                ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
                r = rows_c[:, None, None] * n + ii
                c = cols_c[:, None, None] * n + jj
                keep = blk != 0.0
                off_rows.append(r[keep])
                off_cols.append(c[keep])
                off_vals.append(blk[keep])

        for tag in Tag:
            fb = mesh.faces_with_tag(tag)
            if not len(fb):
                continue
            L = mesh.face_cells[fb, 0]
            BL = space.trace[mesh.face_local[fb, 0], 0]
            zp, zs, w = Zp[fb][..., None], Zs[fb][..., None], W[fb]
            P = _rows(snn[fb], BL) + zp * _rows(vn[fb], BL)
            T = _rows(snt[fb], BL) + zs * _rows(vt[fb], BL)
            if tag in (Tag.NEUMANN, Tag.FREE):
                blk = _outer(w / Zp[fb], P, _rows(snn[fb], BL)) + _outer(w / Zs[fb], T, _rows(snt[fb], BL))
            elif tag == Tag.DIRICHLET:
                blk = _outer(w, P, _rows(vn[fb], BL)) + _outer(w, T, _rows(vt[fb], BL))
            else:  # slip
                blk = _outer(w, P, _rows(vn[fb], BL)) + _outer(w / Zs[fb], T, _rows(snt[fb], BL))
            np.add.at(diag, L, -blk)

        self.upwind_blocks = diag
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        cell = np.arange(nc)[:, None, None] * n
        drow, dcol = (cell + ii).ravel(), (cell + jj).ravel()
        self.mass = sp.csr_matrix((self.mass_blocks.ravel(), (drow, dcol)), shape=(space.dim,) * 2)
        rows = np.concatenate([drow] + off_rows)
        cols = np.concatenate([dcol] + off_cols)
        vals = np.concatenate([diag.ravel()] + off_vals)
        self.upwind = sp.csr_matrix((vals, (rows, cols)), shape=(space.dim,) * 2)
        self._systems: dict[float, tuple] = {}

    def apply_mass(self, y: np.ndarray) -> np.ndarray:
        n = self.space.block_size
        return np.einsum("cij,cj->ci", self.mass_blocks, y.reshape(-1, n)).ravel()

    def apply_upwind(self, y: np.ndarray) -> np.ndarray:
        return self.upwind @ y

    def energy(self, y: np.ndarray) -> float:
        return 0.5 * float(y @ self.apply_mass(y))

    def system(self, gamma: float):
        """Matrix M - gamma A and its block-Jacobi preconditioner (cached per gamma)."""
        if gamma not in self._systems:
            mat = (self.mass - gamma * self.upwind).tocsr()
            pre = BlockJacobi(self.mass_blocks - gamma * self.upwind_blocks)
            self._systems[gamma] = (mat, pre)
        return self._systems[gamma]

    def load(self, t: float, traction=None, velocity=None, force=None) -> np.ndarray:
        """Right-hand side b(t) from boundary tractions, boundary velocities and body force.

        traction(x, t, normal, side) and velocity(x, t, normal, side) return (nf, m, 2)
        arrays at the face quadrature points of the selected faces; force(x, t)
        returns (nc, m, 2) at the cell quadrature points.
        """
        space, mesh = self.space, self.space.mesh
        nb = space.n_nodes
        b = np.zeros((mesh.n_cells, space.block_size))
        Zp, Zs = self.face_impedance
        vn, vt, snn, snt = _face_vectors(mesh.normals)
        W = space.face_w[None, :] * mesh.lengths[:, None]
        for tags, data in (((Tag.NEUMANN,), traction), ((Tag.DIRICHLET,), velocity)):
            if data is None:
                continue
            fb = np.concatenate([mesh.faces_with_tag(tg) for tg in tags]).astype(int)
            if not len(fb):
                continue
            nrm = mesh.normals[fb]
            g = np.asarray(data(space.face_x[fb], t, nrm, mesh.face_side[fb]))
            if not np.any(g):
                continue
            tng = np.column_stack([-nrm[:, 1], nrm[:, 0]])
            gn = np.einsum("fmd,fd->fm", g, nrm)
            gt = np.einsum("fmd,fd->fm", g, tng)
            BL = space.trace[mesh.face_local[fb, 0], 0]
            zp, zs = Zp[fb][..., None], Zs[fb][..., None]
            P = _rows(snn[fb], BL) + zp * _rows(vn[fb], BL)
            T = _rows(snt[fb], BL) + zs * _rows(vt[fb], BL)
            if tags[0] == Tag.NEUMANN:
                cn, ct = gn / Zp[fb], gt / Zs[fb]
            else:
                cn, ct = gn, gt
            contrib = np.einsum("fm,fmi->fi", W[fb] * cn, P) + np.einsum("fm,fmi->fi", W[fb] * ct, T)
            np.add.at(b, mesh.face_cells[fb, 0], contrib)
        if force is not None:
            f = np.asarray(force(space.q_x, t))                 # (nc, m, 2)
            for i in VELOCITY:
                b[:, i * nb:(i + 1) * nb] += np.einsum("cm,cm,ma->ca", space.wdet, f[..., i], space.B)
        return b.ravel()


def apply_mass(space: DGSpace, field: DegradedMaterialField, y: np.ndarray) -> np.ndarray:
    return WaveOperator(space, field).apply_mass(y)


def apply_upwind(space: DGSpace, field: DegradedMaterialField, y: np.ndarray) -> np.ndarray:
    return WaveOperator(space, field).apply_upwind(y)


def energy(op: WaveOperator, y: np.ndarray) -> float:
    """Mechanical energy 1/2 int rho |v|^2 + s : C^{-1} s."""
    return op.energy(y)


def pulse_load(op: WaveOperator, pulse: BoundaryPulse | None, t: float) -> np.ndarray:
    if pulse is None or not pulse.is_active(t):
        return np.zeros(op.space.dim)
    return op.load(t, traction=pulse.traction)


def _solve(mat, pre, rhs, x0, rtol, max_iters, restart):
    y, report = gmres(mat, rhs, precond=pre, x0=x0, rtol=rtol, max_iters=max_iters, restart=restart)
    if not report.converged:
        raise ConvergenceError("GMRES did not converge", report)
    return y, report


def midpoint_step(op: WaveOperator, y: np.ndarray, t: float, dt: float,
                  pulse: BoundaryPulse | None = None, rtol: float = 1e-10,
                  max_iters: int = 500, restart: int = 100, load: np.ndarray | None = None):
    """(M - dt/2 A) y_new = (M + dt/2 A) y + dt b(t + dt/2)."""
    mat, pre = op.system(0.5 * dt)
    rhs = op.apply_mass(y) + 0.5 * dt * op.apply_upwind(y)
    b = pulse_load(op, pulse, t + 0.5 * dt) if load is None else load
    rhs += dt * b
    return _solve(mat, pre, rhs, y, rtol, max_iters, restart)


def euler_step(op_new: WaveOperator, op_old: WaveOperator, y: np.ndarray, t_new: float,
               dt: float, pulse: BoundaryPulse | None = None, rtol: float = 1e-10,
               max_iters: int = 500, restart: int = 100, load: np.ndarray | None = None):
    """(M_new - dt A_new) y_new = M_old y + dt b(t_new)."""
    mat, pre = op_new.system(dt)
    b = pulse_load(op_new, pulse, t_new) if load is None else load
    rhs = op_old.apply_mass(y) + dt * b
    return _solve(mat, pre, rhs, y, rtol, max_iters, restart)


def cfl_time_step(mesh: Mesh, c_max: float, factor: float = 0.5) -> float:
    """Time step with c_max * dt = factor * h."""
    return factor * mesh.h / c_max


def max_wave_speed(field: DegradedMaterialField) -> float:
    return math.sqrt(float(np.max((2 * field.mu + field.lam) / field.rho)))
