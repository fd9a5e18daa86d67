"""Direct conservative finite-difference oracle for the strong-form equation.

Independent of the proximal machinery: node weights ``g = exp(-q_regular)``
are differenced at half nodes, divided by the half-node slope (the mobility
placement) and differenced again, which telescopes exactly.  Time stepping
is explicit with a fourth-order CFL heuristic, so it is only meant for
smooth-regime cross checks at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUp, SosflowError
from .evolution import Trajectory, derive_bounds
from .grid import HeightProfile, ThresholdRule, curvature, slopes

try:  # optional acceleration; the numpy path below is the reference
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco


@dataclass(frozen=True)
class OracleConfig:
    t_final: float
    dt_safety: float = 0.1
    rule: ThresholdRule = field(default_factory=ThresholdRule)
    n_records: int = 33
    max_steps: int = 200_000_000

    def __post_init__(self):
        if not (0.0 < self.dt_safety <= 1.0):
            raise ValueError("dt_safety must lie in (0, 1]")
        if not (self.t_final > 0.0):
            raise ValueError("t_final must be positive")
        if self.n_records < 2:
            raise ValueError("need at least two records (start and end)")


def rhs(h: HeightProfile, rule: ThresholdRule) -> np.ndarray:
    """Conservative node rates; sums to zero up to rounding."""
    dec = curvature(h, rule)
    u = slopes(h)
    dx = h.spec.dx
    g = np.exp(-dec.regular)
    flux = (np.roll(g, -1) - g) / (dx * u)
    return (flux - np.roll(flux, 1)) / dx


def _advance_numpy(h, dx, k0, t, t_stop, dt_safety, u_lo, u_hi, max_steps):
    """Integrate in place until t_stop; returns (t, status, steps).

    status: 0 done, -1 slope window violated, -2 step budget exhausted.
    """
    n = h.size
    root = np.sqrt(dx)
    steps = 0
    tiny = 1e-15 * max(1.0, t_stop)
    while t < t_stop - tiny:
        u = (np.append(h[1:], h[0] + 1.0) - h) / dx
        umin = u.min()
        if umin <= 0.0 or umin < u_lo or u.max() > u_hi:
            return t, -1, steps
        w = np.log(u)
        q = (w - np.roll(w, 1)) / dx
        thr = k0 * max(1.0, float(np.median(np.abs(q))) * root) / root
        g = np.exp(-np.where(np.abs(q) > thr, 0.0, q))
        flux = (np.roll(g, -1) - g) / (dx * u)
        r = (flux - np.roll(flux, 1)) / dx
        dt = dt_safety * dx**4 * umin**2 / (16.0 * g.max())
        if t + dt > t_stop:
            dt = t_stop - t
        h += dt * r
        t += dt
        steps += 1
        if steps > max_steps:
            return t, -2, steps
    return t, 0, steps


@njit(cache=True)
def _advance_jit(h, dx, k0, t, t_stop, dt_safety, u_lo, u_hi, max_steps):  # pragma: no cover
    n = h.size
    root = np.sqrt(dx)
    u = np.empty(n)
    w = np.empty(n)
    q = np.empty(n)
    g = np.empty(n)
    flux = np.empty(n)
    steps = 0
    tiny = 1e-15 * max(1.0, t_stop)
    while t < t_stop - tiny:
        umin = 1e300
        umax = -1e300
        for i in range(n - 1):
            u[i] = (h[i + 1] - h[i]) / dx
        u[n - 1] = (h[0] + 1.0 - h[n - 1]) / dx
        for i in range(n):
            if u[i] < umin:
                umin = u[i]
            if u[i] > umax:
                umax = u[i]
        if umin <= 0.0 or umin < u_lo or umax > u_hi:
            return t, -1, steps
        for i in range(n):
            w[i] = np.log(u[i])
        q[0] = (w[0] - w[n - 1]) / dx
        for i in range(1, n):
            q[i] = (w[i] - w[i - 1]) / dx
        med = np.median(np.abs(q))
        thr = k0 * max(1.0, med * root) / root
        gmax = -1e300
        for i in range(n):
            if abs(q[i]) > thr:
                g[i] = 1.0
            else:
                g[i] = np.exp(-q[i])
            if g[i] > gmax:
                gmax = g[i]
        for i in range(n - 1):
            flux[i] = (g[i + 1] - g[i]) / (dx * u[i])
        flux[n - 1] = (g[0] - g[n - 1]) / (dx * u[n - 1])
        dt = dt_safety * dx**4 * umin * umin / (16.0 * gmax)
        if t + dt > t_stop:
            dt = t_stop - t
        h[0] += dt * (flux[0] - flux[n - 1]) / dx
        for i in range(1, n):
            h[i] += dt * (flux[i] - flux[i - 1]) / dx
        t += dt
        steps += 1
        if steps > max_steps:
            return t, -2, steps
    return t, 0, steps


_advance = _advance_jit if _HAVE_NUMBA else _advance_numpy


def oracle_evolve(h0: HeightProfile, cfg: OracleConfig) -> Trajectory:
    """Explicit integration of the strong form to ``cfg.t_final``.

    The CFL step uses the live slope minimum (the a-priori lower bound is
    far too pessimistic on smooth data); the a-priori window ``[c1/2, 2 c2]``
    still guards validity and a violation raises ``BlowUp`` with the partial
    trajectory attached.
    """
    from .diagnostics import record  # local import to avoid a cycle

    bounds = derive_bounds(h0, cfg.rule)
    record_times = np.linspace(0.0, cfg.t_final, cfg.n_records)
    h = np.array(h0.values, dtype=float)
    dx = h0.spec.dx
    traj = Trajectory(
        times=np.array([0.0]),
        states=[h0],
        reports=[],
        diagnostics=[record(h0, 0.0, cfg.rule, step=0)],
        bounds=bounds,
        snapshot_steps=[0],
    )
    t = 0.0
    done_times = [0.0]
    total_steps = 0
    for k, t_stop in enumerate(record_times[1:], start=1):
        t, status, steps = _advance(
            h,
            dx,
            cfg.rule.k0,
            t,
            float(t_stop),
            cfg.dt_safety,
            bounds.c1 / 2.0,
            2.0 * bounds.c2,
            cfg.max_steps - total_steps,
        )
        total_steps += steps
        if status == -1:
            raise BlowUp(
                f"slopes left [{bounds.c1 / 2:.3g}, {2 * bounds.c2:.3g}] at t={t:.6g}",
                trajectory=traj,
            )
        if status == -2:
            raise SosflowError(
                f"oracle step budget ({cfg.max_steps}) exhausted at t={t:.6g}"
            )
        state = HeightProfile(h0.spec, h.copy())
        traj.states.append(state)
        traj.diagnostics.append(record(state, t, cfg.rule, step=k))
        traj.snapshot_steps.append(k)
        done_times.append(t)
    traj.times = np.array(done_times)
    return traj
