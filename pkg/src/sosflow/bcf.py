"""Discrete step-flow dynamics with nearest-neighbour inverse-gap forces.

Step positions x_i carry heights ``h0 + i/N`` and extend periodically with
``x[i+N] = x[i] + L``.  The force and rate operators follow the displayed
discrete model verbatim; the integrator advances along the dissipative
orientation of that rate field (the orientation that relaxes perturbations
of equal spacing; the literal composition grows them, see the linear-mode
analysis in the tests).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepCollision
from .grid import GridSpec, HeightProfile, project_mean_zero, slopes

try:  # optional acceleration; the numpy path below is the reference
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco


@dataclass(frozen=True, eq=False)
class StepConfiguration:
    """Strictly increasing step positions in [0, L)."""

    n_steps: int
    length: float
    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if self.n_steps < 3:
            raise ValueError("need at least 3 steps")
        if x.shape != (self.n_steps,):
            raise ValueError(f"expected {self.n_steps} positions, got {x.shape}")
        if not (self.length > 0.0):
            raise ValueError("period length must be positive")
        if np.any(x < 0.0) or np.any(x >= self.length):
            raise ValueError("positions must lie in [0, L)")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("positions must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    def gaps(self) -> np.ndarray:
        """Terrace widths ``x[i+1] - x[i]`` with the periodic wrap."""
        return np.diff(np.append(self.x, self.x[0] + self.length))


@dataclass(frozen=True)
class BcfTimeConfig:
    t_final: float
    dt: float | None = None  # None: adaptive from the current minimum gap
    dt_safety: float = 0.2
    record_every: int = 200
    max_halvings: int = 40
    collision_frac: float = 1e-3

    def __post_init__(self):
        if not (self.t_final > 0.0):
            raise ValueError("t_final must be positive")
        if self.dt is not None and not (self.dt > 0.0):
            raise ValueError("dt must be positive when given")
        if not (0.0 < self.dt_safety <= 1.0):
            raise ValueError("dt_safety must lie in (0, 1]")


@dataclass(eq=False)
class StepTrajectory:
    times: np.ndarray
    configurations: list[StepConfiguration]


def _gaps_checked(x: np.ndarray, length: float) -> np.ndarray:
    g = np.diff(np.append(x, x[0] + length))
    if np.any(g <= 0.0):
        raise StepCollision("step gap dropped to or below zero")
    return g


def step_forces(s: StepConfiguration) -> np.ndarray:
    """Nearest-neighbour repulsion ``-(1/gap_right - 1/gap_left)``; sums to zero."""
    g = _gaps_checked(s.x, s.length)
    return -(1.0 / g - 1.0 / np.roll(g, 1))


def bcf_rhs(s: StepConfiguration) -> np.ndarray:
    """Displayed rate law ``N * (f[i+1] - 2 f[i] + f[i-1])``; sums to zero."""
    f = step_forces(s)
    return s.n_steps * (np.roll(f, -1) - 2.0 * f + np.roll(f, 1))


@njit(cache=True)
def _velocity_kernel(x, n, length, g, f, out):  # pragma: no cover - numba twin below
    """Relaxing rate field; returns the minimum gap (<= 0 flags a collision)."""
    for i in range(n - 1):
        g[i] = x[i + 1] - x[i]
    g[n - 1] = x[0] + length - x[n - 1]
    g_min = g[0]
    for i in range(1, n):
        if g[i] < g_min:
            g_min = g[i]
    if g_min <= 0.0:
        return g_min
    f[0] = -(1.0 / g[0] - 1.0 / g[n - 1])
    for i in range(1, n):
        f[i] = -(1.0 / g[i] - 1.0 / g[i - 1])
    out[0] = -n * (f[1] - 2.0 * f[0] + f[n - 1])
    for i in range(1, n - 1):
        out[i] = -n * (f[i + 1] - 2.0 * f[i] + f[i - 1])
    out[n - 1] = -n * (f[0] - 2.0 * f[n - 1] + f[n - 2])
    return g_min


@njit(cache=True)
def _bcf_advance(x, n, length, t, t_stop, dt_fixed, dt_safety, min_gap_allowed,
                 max_halvings, max_steps):  # pragma: no cover - numba twin below
    """Advance in place by at most ``max_steps`` RK4 steps; returns (t, status, steps).

    status: 0 reached t_stop, 1 paused for a record, -1 collision guard failed.
    """
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    stage = np.empty(n)
    x_new = np.empty(n)
    g = np.empty(n)
    f = np.empty(n)
    steps = 0
    tiny = 1e-15 * max(1.0, t_stop)
    while t < t_stop - tiny:
        if steps >= max_steps:
            return t, 1, steps
        g_min = _velocity_kernel(x, n, length, g, f, k1)
        if g_min <= 0.0:
            return t, -1, steps
        if dt_fixed > 0.0:
            dt = dt_fixed
        else:
            dt = dt_safety * g_min * g_min / (8.0 * n)
        if t + dt > t_stop:
            dt = t_stop - t
        halvings = 0
        while True:
            ok = True
            for i in range(n):
                stage[i] = x[i] + 0.5 * dt * k1[i]
            if _velocity_kernel(stage, n, length, g, f, k2) <= 0.0:
                ok = False
            if ok:
                for i in range(n):
                    stage[i] = x[i] + 0.5 * dt * k2[i]
                if _velocity_kernel(stage, n, length, g, f, k3) <= 0.0:
                    ok = False
            if ok:
                for i in range(n):
                    stage[i] = x[i] + dt * k3[i]
                if _velocity_kernel(stage, n, length, g, f, k4) <= 0.0:
                    ok = False
            if ok:
                for i in range(n):
                    x_new[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                g_lo = x_new[0] + length - x_new[n - 1]
                for i in range(n - 1):
                    gi = x_new[i + 1] - x_new[i]
                    if gi < g_lo:
                        g_lo = gi
                if g_lo <= min_gap_allowed:
                    ok = False
            if ok:
                break
            halvings += 1
            if halvings > max_halvings:
                return t, -1, steps
            dt *= 0.5
        for i in range(n):
            x[i] = x_new[i]
        t += dt
        steps += 1
    return t, 0, steps


def _bcf_advance_numpy(x, n, length, t, t_stop, dt_fixed, dt_safety, min_gap_allowed,
                       max_halvings, max_steps):
    """Vectorized fallback with the same contract as the jitted kernel."""

    def velocity(xv):
        g = np.diff(np.append(xv, xv[0] + length))
        g_min = g.min()
        if g_min <= 0.0:
            return None, g_min
        f = -(1.0 / g - 1.0 / np.roll(g, 1))
        return -n * (np.roll(f, -1) - 2.0 * f + np.roll(f, 1)), g_min

    steps = 0
    tiny = 1e-15 * max(1.0, t_stop)
    while t < t_stop - tiny:
        if steps >= max_steps:
            return t, 1, steps
        k1, g_min = velocity(x)
        if k1 is None:
            return t, -1, steps
        dt = dt_fixed if dt_fixed > 0.0 else dt_safety * g_min**2 / (8.0 * n)
        dt = min(dt, t_stop - t)
        halvings = 0
        while True:
            ok = True
            x_new = None
            k2, g2 = velocity(x + 0.5 * dt * k1)
            if k2 is None:
                ok = False
            else:
                k3, g3 = velocity(x + 0.5 * dt * k2)
                if k3 is None:
                    ok = False
                else:
                    k4, g4 = velocity(x + dt * k3)
                    if k4 is None:
                        ok = False
                    else:
                        x_new = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                        g_new = np.diff(np.append(x_new, x_new[0] + length))
                        if g_new.min() <= min_gap_allowed:
                            ok = False
            if ok:
                break
            halvings += 1
            if halvings > max_halvings:
                return t, -1, steps
            dt *= 0.5
        x[:] = x_new
        t += dt
        steps += 1
    return t, 0, steps


_advance_steps = _bcf_advance if _HAVE_NUMBA else _bcf_advance_numpy


def bcf_evolve(s0: StepConfiguration, cfg: BcfTimeConfig) -> StepTrajectory:
    """Classical 4-stage explicit integration with a collision guard.

    A trial step that would push the minimum gap below
    ``collision_frac * L / N`` is rejected and retried with half the step
    size; ``StepCollision`` is raised after ``max_halvings`` rejections in a
    row.  Equal spacing is a fixed point.
    """
    n, length = s0.n_steps, s0.length
    min_gap_allowed = cfg.collision_frac * length / n
    x = np.array(s0.x, dtype=float)
    t = 0.0
    times = [0.0]
    configs = [s0]
    tiny = 1e-15 * max(1.0, cfg.t_final)

    def snapshot(xv: np.ndarray) -> StepConfiguration:
        # positions drift as a block; fold into [0, L) and rotate the labels
        # (the height offset per step is a free constant)
        y = np.mod(xv, length)
        y = np.roll(y, -int(np.argmin(y)))
        return StepConfiguration(n, length, y)

    dt_fixed = -1.0 if cfg.dt is None else float(cfg.dt)
    while t < cfg.t_final - tiny:
        t, status, _ = _advance_steps(
            x, n, length, t, cfg.t_final, dt_fixed, cfg.dt_safety,
            min_gap_allowed, cfg.max_halvings, cfg.record_every,
        )
        if status == -1:
            raise StepCollision(
                f"collision guard failed after {cfg.max_halvings} halvings at t={t:.6g}"
            )
        times.append(t)
        configs.append(snapshot(x))
    return StepTrajectory(times=np.array(times), configurations=configs)


def steps_to_profile(s: StepConfiguration, grid: GridSpec) -> HeightProfile:
    """Sample the piecewise-linear interpolant of the step staircase levels.

    Levels ``i/N`` at the step positions are interpolated periodically onto
    the grid nodes and projected to mean zero.
    """
    levels = np.arange(s.n_steps) / s.n_steps
    x_ext = np.concatenate([s.x - s.length, s.x, s.x + s.length])
    lv_ext = np.concatenate([levels - 1.0, levels, levels + 1.0])
    values = np.interp(grid.nodes(), x_ext, lv_ext)
    return HeightProfile(grid, project_mean_zero(values))


def profile_to_steps(h: HeightProfile, n_steps: int) -> StepConfiguration:
    """Invert a monotone profile at levels ``h[0] + i/N`` by interpolation."""
    if n_steps < 3:
        raise ValueError("need at least 3 steps")
    slopes(h)  # raises NonMonotone early
    levels = h.values[0] + np.arange(n_steps) / n_steps
    hs = np.append(h.values, h.values[0] + 1.0)
    xs = np.append(h.x(), h.spec.length)
    positions = np.interp(levels, hs, xs)
    positions[0] = 0.0  # exact by construction, protect against rounding
    return StepConfiguration(n_steps, h.spec.length, positions)
