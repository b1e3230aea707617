"""Staggered elastic wave / phase-field time stepping.

Each step advances the wave by the implicit midpoint rule with the current
material, then advances the phase field with the resulting stresses.  When the
projected phase field removes nodes from the elastic domain the material is
degraded and the wave step is recomputed with the dissipative implicit Euler
rule from the old state.  The next step size is the small one whenever the
phase field moved.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import Callable

import numpy as np

from .config import RunConfig, validate
from .dg import (DGSpace, DGState, BoundaryPulse, WaveOperator, euler_step, midpoint_step,
                 pulse_load)
from .krylov import SolveReport
from .material import DegradedMaterialField, degrade, undamaged
from .mesh import Mesh, build_mesh
from .output import write_trace, write_vtu
from .phase_field import (PF_QUAD, PhaseFieldSolver, PhaseParams, PhaseState,
                          max_principal_stress_2d, project_and_track)

log = logging.getLogger(__name__)

ELASTIC = "elastic"
DISSIPATIVE = "dissipative"
S_CHANGE_TOL = 1e-14


class NonFiniteStateError(FloatingPointError):
    pass


@dataclass
class StepRecord:
    step: int
    t: float
    dt: float
    kind: str
    energy: float
    dissipation: float
    cracked_nodes: int
    gmres_iters: int
    s_changed: bool = False
    domain_shrank: bool = False
    next_dt: float = 0.0
    max_sigma_I: float = 0.0
    new_cracks: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    reports: list[SolveReport] = field(default_factory=list)
    material_version: int = 0


@dataclass
class RunTrace:
    records: list[StepRecord] = field(default_factory=list)
    initial_energy: float = 0.0
    snapshots: list[tuple[int, float, Path | None]] = field(default_factory=list)

    @property
    def first_crack(self) -> StepRecord | None:
        return next((r for r in self.records if len(r.new_cracks)), None)

    @property
    def total_dissipation(self) -> float:
        return float(sum(r.dissipation for r in self.records))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


@dataclass
class SimState:
    wave: DGState
    phase: PhaseState
    material: DegradedMaterialField
    displacement: np.ndarray         # (nc, 2, nb) DG coefficients of u
    dt_next: float
    step: int = 0

    @property
    def t(self) -> float:
        return self.wave.t


class Simulation:
    def __init__(self, config: RunConfig, mesh: Mesh | None = None):
        self.config = validate(config)
        cfg = self.config
        self.mesh = mesh if mesh is not None else build_mesh(cfg.geometry_map(), cfg.geometry.level)
        self.space = DGSpace(self.mesh, cfg.geometry.degree)
        self.base = cfg.base_material()
        p = cfg.phase
        self.params = PhaseParams(p.tau_r, p.M_geom, p.l_c, p.sigma_c, p.s_min)
        self.pf = PhaseFieldSolver(self.mesh, self.params, rtol=cfg.solver.pf_rtol)
        self.pulse = self.pulse_for(cfg)
        self._op: WaveOperator | None = None
        # ratio s33 / (s11 + s22) in plane strain; unchanged by the degradation scaling
        self.nu = self.base.lam / (2 * (self.base.lam + self.base.mu))

    @staticmethod
    def pulse_for(cfg: RunConfig) -> BoundaryPulse:
        q = cfg.pulse
        return BoundaryPulse(q.amplitude_minus, cfg.amplitude_plus, q.width_minus, q.width_plus,
                             q.shift_minus, q.shift_plus, q.t_init, cfg.base_material().c_p)

    # operators are cached by material version so elastic steps reuse factorizations
    def operator(self, material: DegradedMaterialField) -> WaveOperator:
        if self._op is None or self._op.field.version != material.version:
            self._op = WaveOperator(self.space, material)
        return self._op

    def initialize(self, initial: Callable | None = None) -> SimState:
        """Intact phase field, base material, initial data (zero unless `initial` is given)."""
        n = self.mesh.n_vertices
        y = self.space.zeros() if initial is None else self.space.interpolate(initial)
        u = np.zeros((self.mesh.n_cells, 2, self.space.n_nodes))
        return SimState(DGState(y, 0.0), PhaseState.intact(n),
                        undamaged(n, self.base, self.config.material.reg_factor),
                        u, self.config.time.dt_el)

    def principal_stress(self, y: np.ndarray, xi: np.ndarray = PF_QUAD[0]) -> np.ndarray:
        vals = self.space.evaluate(y, xi)
        s11, s22, s12 = vals[..., 2], vals[..., 3], vals[..., 4]
        s33 = self.nu * (s11 + s22) if self.config.phase.out_of_plane else None
        return max_principal_stress_2d(s11, s22, s12, s33)

    def driving_force(self, y: np.ndarray) -> np.ndarray:
        return np.maximum(self.principal_stress(y) / self.params.sigma_c - 1.0, 0.0)

    def _solver_kwargs(self):
        s = self.config.solver
        return dict(rtol=s.rtol, max_iters=s.max_iters, restart=s.restart)

    def step(self, state: SimState, dt: float | None = None) -> tuple[SimState, StepRecord]:
        dt = state.dt_next if dt is None else dt
        t_old, t_new = state.t, state.t + dt
        y_old = state.wave.values
        op = self.operator(state.material)
        e_old = op.energy(y_old)

        # S1: elastic candidate with the current material
        y_mid, rep = midpoint_step(op, y_old, t_old, dt, self.pulse, **self._solver_kwargs())
        b = pulse_load(op, self.pulse, t_old + 0.5 * dt)
        work = dt * float(b @ (0.5 * (y_old + y_mid)))
        reports = [rep]

        # S2, S3: phase-field candidate, projection, infimum and elastic domain
        prev = state.phase
        if self.config.phase.enabled:
            cand = self.pf.step(prev.s, self.driving_force(y_mid), dt)[0]
            phase = project_and_track(cand, prev, self.params.s_min, t_new)
            s_changed = bool(np.max(np.abs(phase.s - prev.s)) > S_CHANGE_TOL)
        else:
            phase = PhaseState(prev.s, prev.s_inf, prev.elastic, t_new)
            s_changed = False
        new_cracks = np.flatnonzero(prev.elastic & ~phase.elastic)

        if not len(new_cracks):
            # S4: accept the candidate, material untouched
            kind, material, y_new, op_new = ELASTIC, state.material, y_mid, op
        else:
            # S5: degrade; S6: discard the candidate and recompute dissipatively
            kind = DISSIPATIVE
            material = degrade(phase.s_inf, self.base, self.config.material.reg_factor)
            op_new = self.operator(material)
            y_new, rep = euler_step(op_new, op, y_old, t_new, dt, self.pulse, **self._solver_kwargs())
            work = dt * float(pulse_load(op_new, self.pulse, t_new) @ y_new)
            reports.append(rep)

        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(phase.s))):
            raise NonFiniteStateError(f"non-finite state at step {state.step + 1}, t = {t_new:.6g}")

        # S7: displacement and next step size
        u = state.displacement + dt * self.space.velocity_part(y_new)
        dt_next = self.config.time.dt_pf if s_changed else self.config.time.dt_el
        e_new = op_new.energy(y_new)
        record = StepRecord(
            step=state.step + 1, t=t_new, dt=dt, kind=kind, energy=e_new,
            dissipation=e_old + work - e_new, cracked_nodes=int(np.count_nonzero(~phase.elastic)),
            gmres_iters=sum(r.iterations for r in reports), s_changed=s_changed,
            domain_shrank=bool(len(new_cracks)), next_dt=dt_next,
            max_sigma_I=float(np.max(self.principal_stress(y_new))),
            new_cracks=new_cracks, reports=reports, material_version=material.version)
        new_state = SimState(DGState(y_new, t_new), phase, material, u, dt_next, state.step + 1)
        return new_state, record

    def _clip(self, state: SimState, t_end: float) -> float:
        dt = state.dt_next
        remaining = t_end - state.t
        if dt >= remaining - 1e-9 * dt:
            return remaining
        return dt

    def snapshot_fields(self, state: SimState):
        vals = self.space.evaluate(state.wave.values, np.zeros((1, 2)))[:, 0, :]
        u = np.einsum("a,cda->cd", _center_basis(self.space), state.displacement)
        point = {"s": state.phase.s, "s_inf": state.phase.s_inf}
        cell = {"velocity_magnitude": np.hypot(vals[:, 0], vals[:, 1]),
                "stress_trace": vals[:, 2] + vals[:, 3],
                "sigma_I": self.principal_stress(state.wave.values, np.zeros((1, 2)))[:, 0],
                "displacement": u}
        return point, cell

    def run(self, output_dir=None, t_end: float | None = None,
            callback: Callable[[SimState, StepRecord], None] | None = None) -> tuple[SimState, RunTrace]:
        """Step until t_end; writes snapshots and trace.csv when output_dir is given."""
        cfg = self.config
        t_end = cfg.time.t_end if t_end is None else t_end
        out = Path(output_dir) if output_dir is not None else None
        state = self.initialize()
        trace = RunTrace(initial_energy=self.operator(state.material).energy(state.wave.values))
        interval = cfg.output.interval
        n_snap = 0

        def maybe_snapshot(st):
            nonlocal n_snap
            if st.t < n_snap * interval - 1e-9 * interval:
                return
            path = None
            if out is not None and cfg.output.vtu:
                path = write_vtu(self.mesh, out / f"out_{st.step:06d}.vtu", *self.snapshot_fields(st))
            trace.snapshots.append((st.step, st.t, path))
            n_snap = math.floor(st.t / interval + 1e-9) + 1

        maybe_snapshot(state)
        while state.t < t_end - 1e-12 * max(1.0, t_end):
            state, rec = self.step(state, self._clip(state, t_end))
            trace.records.append(rec)
            if len(rec.new_cracks):
                log.info("t=%.4f: %d new cracked nodes", rec.t, len(rec.new_cracks))
            if callback is not None:
                callback(state, rec)
            maybe_snapshot(state)
        if out is not None:
            write_trace(trace.records, out / "trace.csv")
        return state, trace


def _center_basis(space: DGSpace) -> np.ndarray:
    from .reference import tensor_basis
    return tensor_basis(space.degree, np.zeros((1, 2)))[0][0]


@dataclass
class PilotResult:
    peak_sigma_I: float
    peak_time: float
    peak_position: np.ndarray
    amplitude_used: float
    amplitude_calibrated: float
    history: list[tuple[float, float]]


def pilot(config: RunConfig, t_start: float | None = None) -> PilotResult:
    """Elastic-only run; rescale A_- so the peak principal stress equals target_ratio * sigma_c.

    The peak is taken over t >= t_start (default: after the loading phase, when
    only reflected and superposed waves remain).  The response is linear in the
    amplitude, so one run suffices.
    """
    cfg = config.copy()
    cfg.phase.enabled = False
    cfg.output.vtu = False
    sim = Simulation(cfg)
    t_start = cfg.pulse.t_init if t_start is None else t_start
    best = {"value": -np.inf, "t": 0.0, "x": np.zeros(2)}
    history = []

    def watch(state, rec):
        history.append((rec.t, rec.max_sigma_I))
        if rec.t >= t_start and rec.max_sigma_I > best["value"]:
            sig = sim.principal_stress(state.wave.values)
            c, m = np.unravel_index(np.argmax(sig), sig.shape)
            best.update(value=float(sig[c, m]), t=rec.t, x=_quad_point(sim, c, m))

    sim.run(None, t_end=cfg.pilot.t_end, callback=watch)
    A = cfg.pulse.amplitude_minus
    if not best["value"] > 0:
        raise RuntimeError("pilot run produced no tensile stress; check the pulse settings")
    scale = cfg.pilot.target_ratio * cfg.phase.sigma_c / best["value"]
    return PilotResult(best["value"], best["t"], best["x"], A, A * scale, history)


def _quad_point(sim: Simulation, cell: int, m: int) -> np.ndarray:
    x, _, _ = sim.mesh.cell_geometry(PF_QUAD[0])
    return x[cell, m]
