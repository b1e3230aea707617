"""Quasi-one-dimensional strip runs compared with the closed-form bar solution."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import reference
from .config import RunConfig
from .driver import Simulation
from .mesh import RIGHT, Tag
from .oracle_1d import Bar1DProblem, Spall, analytic_state, spall_location

PROFILE_POINTS = 4001


def parse_list(text: str, typ=float) -> list:
    return [typ(item) for item in text.split(",") if item.strip()]


def strip_problem(cfg: RunConfig) -> Bar1DProblem:
    """Oracle for the left-loaded strip: stress p(t) = g(t) at x1 = x1_min."""
    g, q = cfg.geometry, cfg.pulse
    mat = cfg.base_material()
    c = mat.c_p
    sim_pulse = Simulation.pulse_for(cfg)
    return Bar1DProblem(length=g.x1_max - g.x1_min, c=c, Z=mat.rho * c,
                        pulse=lambda t: np.array([sim_pulse.value(ti, 0) for ti in np.atleast_1d(t)]),
                        duration=min(q.t_init, (q.shift_minus + q.width_minus) / c))


def pulse_peak(problem: Bar1DProblem, n: int = 20001) -> float:
    t = np.linspace(0.0, problem.duration, n)
    return float(np.max(np.abs(problem.pulse(t))))


@dataclass
class LevelResult:
    level: int
    h: float
    dt: float
    l2_error: float          # relative space-time L2 error of s11
    free_end_ratio: float    # max |s11| on the free end / pulse peak
    steps: int
    max_gmres_iters: int


@dataclass
class Verify1DResult:
    levels: list[LevelResult] = field(default_factory=list)
    wave_speed: float = float("nan")
    c_exact: float = float("nan")
    spall_exact: Spall | None = None
    spall_dg: Spall | None = None

    @property
    def orders(self) -> list[float]:
        out = []
        for a, b in zip(self.levels, self.levels[1:]):
            out.append(float(np.log(a.l2_error / b.l2_error) / np.log(a.h / b.h)))
        return out


class StripProbe:
    """Samples s11 of a DG state on a rectangle: space-time error, end values, centreline."""

    def __init__(self, sim: Simulation, problem: Bar1DProblem, n_quad: int = 4):
        self.sim, self.problem = sim, problem
        mesh, space = sim.mesh, sim.space
        self.x0 = mesh.geometry.x1[0]
        self.q_ref, qw = reference.tensor_gauss(n_quad)
        self.q_x, _, det = mesh.cell_geometry(self.q_ref)
        self.wdet = det * qw
        right = np.array([f for f in mesh.faces_with_tag(Tag.FREE)
                          if mesh.face_side[f] == RIGHT], dtype=int)
        if not len(right):
            raise ValueError("strip needs a free right end")
        self.end_cells = mesh.face_cells[right, 0]
        self.end_xi = np.column_stack([np.ones(5), np.linspace(-1, 1, 5)])
        # centreline samples: the bottom row of cells, dense in xi1
        x2min = mesh.geometry.x2[0]
        row = np.flatnonzero(np.isclose(mesh.ref_vertices[mesh.cells[:, 0], 1], x2min))
        xi1 = np.linspace(-1, 1, 16)
        self.line_xi = np.column_stack([xi1, np.full_like(xi1, -1.0)])
        self.line_cells = row
        lx, _, _ = mesh.cell_geometry(self.line_xi)
        self.line_x = lx[row, :, 0].ravel()
        self.order = np.argsort(self.line_x, kind="stable")
        self.grid = np.linspace(self.x0, self.x0 + problem.length, PROFILE_POINTS)
        self.err2 = 0.0
        self.ref2 = 0.0
        self.end_max = 0.0

    def exact_s11(self, t: float) -> np.ndarray:
        return analytic_state(self.problem, np.clip(self.q_x[..., 0] - self.x0, 0, self.problem.length), t)[1]

    def accumulate(self, y: np.ndarray, t: float, dt: float) -> None:
        s_h = self.sim.space.evaluate(y, self.q_ref)[..., 2]
        s_e = self.exact_s11(t)
        self.err2 += dt * float(np.sum(self.wdet * (s_h - s_e) ** 2))
        self.ref2 += dt * float(np.sum(self.wdet * s_e ** 2))
        end = self.sim.space.evaluate(y, self.end_xi)[self.end_cells, :, 2]
        self.end_max = max(self.end_max, float(np.max(np.abs(end))))

    def profile(self, y: np.ndarray) -> np.ndarray:
        """s11 along x1 on a uniform grid (piecewise linear between samples)."""
        vals = self.sim.space.evaluate(y, self.line_xi)[self.line_cells, :, 2].ravel()
        return np.interp(self.grid, self.line_x[self.order], vals[self.order])


def cross_correlation_speed(grid: np.ndarray, first: np.ndarray, second: np.ndarray,
                            dt: float) -> float:
    """Shift maximizing the correlation of two profiles, refined by a parabola, divided by dt."""
    dx = grid[1] - grid[0]
    corr = np.correlate(second, first, mode="full")
    k = int(np.argmax(corr))
    frac = 0.0
    if 0 < k < len(corr) - 1:
        a, b, c = corr[k - 1], corr[k], corr[k + 1]
        denom = a - 2 * b + c
        frac = 0.5 * (a - c) / denom if denom != 0 else 0.0
    lag = k - (len(first) - 1) + frac
    return lag * dx / dt


def run_level(cfg: RunConfig, level: int, problem: Bar1DProblem, wave_times=None,
              spall_threshold: float | None = None):
    cfg = cfg.copy()
    cfg.geometry.level = level
    cfg.phase.enabled = False
    c = problem.c
    dt = cfg.verify.cfl * 2.0 ** -level / c
    cfg.time.dt_el = cfg.time.dt_pf = dt
    cfg.time.t_end = cfg.verify.t_end
    sim = Simulation(cfg)
    probe = StripProbe(sim, problem)
    profiles = {}
    spall = []
    wave_times = sorted(wave_times or [])
    max_iters = [0]

    def cb(state, rec):
        probe.accumulate(state.wave.values, state.t, rec.dt)
        max_iters[0] = max(max_iters[0], rec.gmres_iters)
        for tw in wave_times:
            if tw not in profiles and state.t >= tw - 1e-12:
                profiles[tw] = (state.t, probe.profile(state.wave.values))
        if spall_threshold is not None and not spall:
            prof = probe.profile(state.wave.values)
            i = int(np.argmax(prof))
            if prof[i] > spall_threshold:
                x = probe.grid[i] - probe.x0
                spall.append(Spall(float(x), state.t, problem.length - float(x)))

    _, trace = sim.run(None, callback=cb)
    peak = pulse_peak(problem)
    res = LevelResult(level, 2.0 ** -level, dt, float(np.sqrt(probe.err2 / probe.ref2)),
                      probe.end_max / peak, len(trace.records), max_iters[0])
    return res, profiles, probe.grid, (spall[0] if spall else None)


def verify_1d(cfg: RunConfig, levels: list[int] | None = None, output_dir=None) -> Verify1DResult:
    problem = strip_problem(cfg)
    levels = levels or parse_list(cfg.verify.levels, int)
    wave_times = parse_list(cfg.verify.wave_speed_times)
    threshold = cfg.verify.spall_fraction * pulse_peak(problem)
    result = Verify1DResult(c_exact=problem.c)
    result.spall_exact = spall_location(problem, threshold, t_max=cfg.verify.t_end)
    for i, lev in enumerate(levels):
        finest = i == len(levels) - 1
        res, profiles, grid, spall = run_level(cfg, lev, problem, wave_times if finest else None,
                                               threshold if finest else None)
        result.levels.append(res)
        if finest:
            result.spall_dg = spall
            if len(profiles) == 2:
                (t1, p1), (t2, p2) = (profiles[t] for t in sorted(profiles))
                result.wave_speed = cross_correlation_speed(grid, p1, p2, t2 - t1)
    if output_dir is not None:
        write_verify_csv(result, Path(output_dir) / "verify_1d.csv")
    return result


def write_verify_csv(result: Verify1DResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "l2_error", "free_end_ratio", "dt", "steps"])
        for r in result.levels:
            w.writerow([repr(r.h), repr(r.l2_error), repr(r.free_end_ratio), repr(r.dt), r.steps])
        w.writerow([])
        w.writerow(["quantity", "exact", "dg"])
        w.writerow(["wave_speed", repr(result.c_exact), repr(result.wave_speed)])
        ex, dg = result.spall_exact, result.spall_dg
        w.writerow(["spall_distance_from_free_end", repr(ex.distance_from_free_end) if ex else "none",
                    repr(dg.distance_from_free_end) if dg else "none"])
        w.writerow(["spall_time", repr(ex.time) if ex else "none", repr(dg.time) if dg else "none"])
    return path
