"""Closed-form d'Alembert solution for a bar loaded at x = 0 and free at x = L.

The left end carries the prescribed stress p(t); the right end is traction
free.  Writing the stress as F(t - x/c) + G(t + x/c), the boundary conditions
give F(t) = p(t) + F(t - 2L/c) and G(s) = -F(s - 2L/c), so every reflection is
accounted for by summing shifted copies of the pulse.  Tension is positive.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar


@dataclass(frozen=True)
class Bar1DProblem:
    length: float
    c: float
    Z: float
    pulse: Callable[[np.ndarray], np.ndarray]   # stress at x = 0, zero for t < 0
    duration: float                             # pulse support is [0, duration]

    def __post_init__(self):
        if not (self.c > 0 and self.Z > 0 and self.length > 0):
            raise ValueError("length, wave speed and impedance must be positive")

    @property
    def rho(self) -> float:
        return self.Z / self.c

    @property
    def modulus(self) -> float:
        return self.Z * self.c

    def _p(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        inside = (t >= 0) & (t <= self.duration)
        out[inside] = self.pulse(t[inside])
        return out

    def right_going(self, tau):
        """F(tau) = sum_k p(tau - 2kL/c)."""
        tau = np.asarray(tau, dtype=float)
        period = 2 * self.length / self.c
        n = int(max(0.0, np.max(tau, initial=0.0)) // period) + 1
        return sum(self._p(tau - k * period) for k in range(n + 1))


def analytic_state(problem: Bar1DProblem, x, t):
    """Velocity and stress at positions x and times t (broadcast)."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    if np.any(x < -1e-12) or np.any(x > problem.length * (1 + 1e-12)):
        raise ValueError("x outside the bar")
    c, L, Z = problem.c, problem.length, problem.Z
    tau = t - x / c
    f = problem.right_going(tau)
    # t + x/c - 2L/c written so that it equals tau bitwise at x = L
    g = -problem.right_going(tau + 2 * (x - L) / c)
    return (g - f) / Z, f + g


def energy(problem: Bar1DProblem, t: float, n: int = 4000) -> float:
    """1/2 int rho v^2 + sigma^2 / E dx by composite Gauss quadrature."""
    xg, wg = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, problem.length, n + 1)
    h = np.diff(edges)
    x = (edges[:-1, None] + 0.5 * h[:, None] * (xg + 1)).ravel()
    w = (0.5 * h[:, None] * wg).ravel()
    v, s = analytic_state(problem, x, t)
    return 0.5 * float(w @ (problem.rho * v ** 2 + s ** 2 / problem.modulus))


@dataclass
class Spall:
    position: float
    time: float
    distance_from_free_end: float


def _max_tension(problem, t, x_grid):
    _, s = analytic_state(problem, x_grid, t)
    i = int(np.argmax(s))
    lo, hi = x_grid[max(i - 1, 0)], x_grid[min(i + 1, len(x_grid) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: -analytic_state(problem, x, t)[1],
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if -res.fun > s[i]:
            return float(-res.fun), float(res.x)
    return float(s[i]), float(x_grid[i])


def spall_location(problem: Bar1DProblem, sigma_c: float, t_max: float | None = None,
                   nx: int = 2001, nt: int = 2001, tol: float = 1e-10) -> Spall | None:
    """First point in time where the tension exceeds sigma_c, or None.

    Bracket the first exceedance on a coarse time grid, then bisect in time with
    the spatial maximum refined locally at each probe.
    """
    L, c = problem.length, problem.c
    if t_max is None:
        t_max = problem.duration + 4 * L / c
    x_grid = np.linspace(0.0, L, nx)
    times = np.linspace(0.0, t_max, nt)
    X, T = np.meshgrid(x_grid, times)
    _, S = analytic_state(problem, X, T)
    hit = np.flatnonzero(S.max(axis=1) > sigma_c)
    if not len(hit):
        return None
    j = hit[0]
    lo, hi = times[max(j - 1, 0)], times[j]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _max_tension(problem, mid, x_grid)[0] > sigma_c:
            hi = mid
        else:
            lo = mid
    x = _max_tension(problem, hi, x_grid)[1]
    return Spall(x, float(hi), L - x)


def rectangular_pulse(amplitude: float, duration: float) -> Callable:
    return lambda t: np.full_like(np.asarray(t, dtype=float), amplitude)


def triangular_pulse(amplitude: float, duration: float) -> Callable:
    """Sharp front of height `amplitude`, linear decay to zero over `duration`."""
    return lambda t: amplitude * (1.0 - np.asarray(t, dtype=float) / duration)


def bump_pulse(amplitude: float, width: float, shift: float, c: float) -> Callable:
    """a(c t - shift) with a(s) = amplitude exp(-1/(width^2 - s^2)) on |s| < width."""
    def p(t):
        s = c * np.asarray(t, dtype=float) - shift
        out = np.zeros_like(s)
        inside = np.abs(s) < width
        out[inside] = amplitude * np.exp(-1.0 / (width ** 2 - s[inside] ** 2))
        return out
    return p
