"""Minimizing-movement time stepping and derived a-priori bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleStart, NoDecrease
from .functional import (
    BvBallSpec,
    bv_ball_indicator,
    driving_functional,
    functional_height_gradient,
)
from .grid import (
    HeightProfile,
    ThresholdRule,
    heights_from_logslope,
    normalize_logslope,
    project_mean_zero,
    random_logslope,
    slopes,
)
from .resolvent import InnerSolverConfig, StepReport, resolvent_step


@dataclass(frozen=True)
class EvolutionConfig:
    t_final: float
    n_steps: int
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    rule: ThresholdRule = field(default_factory=ThresholdRule)
    c_star_override: float | None = None
    snapshot_every: int = 1

    def __post_init__(self):
        if not (self.t_final > 0.0):
            raise ValueError("t_final must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")


@dataclass(frozen=True)
class DerivedBounds:
    """Slope window and ball radius implied by the initial functional value.

    One slope always equals 1/L (the slopes average to it), and the total
    variation of ln h_x is at most twice the initial functional value, so the
    log-slope stays within that band of ln(1/L).  The ball radius uses the
    upper slope bound, the safe side of the measure-norm comparison.
    """

    phi0: float
    c1: float
    c2: float
    c_star: float

    def __post_init__(self):
        if not (0.0 < self.c1 <= self.c2):
            raise ValueError("slope bounds must satisfy 0 < c1 <= c2")
        if not (self.c_star >= 1.0):
            raise ValueError("ball radius must be at least 1")


@dataclass(eq=False)
class Trajectory:
    """Snapshots plus per-step reports and diagnostics of one evolution run.

    ``times`` aligns with ``states`` (snapshots); reports and diagnostics
    cover every accepted step regardless of the snapshot stride.
    """

    times: np.ndarray
    states: list[HeightProfile]
    reports: list[StepReport]
    diagnostics: list
    bounds: DerivedBounds | None = None
    snapshot_steps: list[int] | None = None  # step index of each stored state


def derive_bounds(
    h0: HeightProfile,
    rule: ThresholdRule | None = None,
    c_star_override: float | None = None,
) -> DerivedBounds:
    rule = rule or ThresholdRule()
    val = driving_functional(h0, rule)
    if not val.is_finite:
        raise InfeasibleStart(f"initial functional is infinite ({val.infeasible_reason})")
    phi0 = val.value
    inv_l = 1.0 / h0.spec.length
    c1 = inv_l * np.exp(-2.0 * phi0)
    c2 = inv_l * np.exp(2.0 * phi0)
    c_star = c_star_override if c_star_override is not None else 2.0 * c2 * phi0 + 1.0
    return DerivedBounds(phi0=phi0, c1=float(c1), c2=float(c2), c_star=float(c_star))


def evolve(h0: HeightProfile, cfg: EvolutionConfig) -> Trajectory:
    """Run the proximal iteration to ``t_final`` in ``n_steps`` nominal steps.

    Per-step back-off may insert extra, shorter steps; recorded times always
    reflect the step sizes actually used and the run lands on ``t_final``
    exactly.  ``NoDecrease`` from a step is re-raised with the partial
    trajectory attached.
    """
    from .diagnostics import record  # local import to avoid a cycle

    bounds = derive_bounds(h0, cfg.rule, cfg.c_star_override)
    ball = BvBallSpec(bounds.c_star)
    if bv_ball_indicator(h0, ball) != 0.0:
        raise InfeasibleStart("initial state violates the derived BV ball")

    tau_nominal = cfg.t_final / cfg.n_steps
    max_total_steps = 16 * cfg.n_steps
    traj = Trajectory(
        times=np.array([0.0]),
        states=[h0],
        reports=[],
        diagnostics=[record(h0, 0.0, cfg.rule, step=0)],
        bounds=bounds,
        snapshot_steps=[0],
    )
    t = 0.0
    h = h0
    step_index = 0
    snap_times = [0.0]
    while t < cfg.t_final - 1e-15 * max(1.0, cfg.t_final):
        if step_index >= max_total_steps:
            raise NoDecrease(
                f"step budget exhausted after {step_index} steps at t={t:.6g}",
                trajectory=traj,
            )
        tau_req = min(tau_nominal, cfg.t_final - t)
        try:
            h, report = resolvent_step(h, tau_req, ball, cfg.rule, cfg.inner)
        except NoDecrease as err:
            err.trajectory = traj
            raise
        t = min(t + report.tau_used, cfg.t_final)
        step_index += 1
        traj.reports.append(report)
        traj.diagnostics.append(record(h, t, cfg.rule, step=step_index))
        is_last = t >= cfg.t_final - 1e-15 * max(1.0, cfg.t_final)
        if step_index % cfg.snapshot_every == 0 or is_last:
            traj.states.append(h)
            snap_times.append(t)
            traj.snapshot_steps.append(step_index)
    traj.times = np.array(snap_times)
    return traj


@dataclass(frozen=True)
class LipschitzReport:
    max_step_rate: float
    local_slope_estimate: float


def local_slope_estimate(
    h0: HeightProfile,
    rule: ThresholdRule | None = None,
    n_probes: int = 100,
    seed: int = 0,
    amplitude: float = 1e-3,
) -> float:
    """One-sided sample estimate of the metric slope of the functional at h0.

    Maximizes ``max(f(h0) - f(v), 0) / ||h0 - v||`` over random smooth
    log-slope perturbations; a few probes follow the negative height-space
    gradient, which is the direction that realizes the slope, so the estimate
    is a tight lower bound rather than an isotropic-sampling one.
    """
    rule = rule or ThresholdRule()
    val0 = driving_functional(h0, rule)
    if not val0.is_finite:
        raise InfeasibleStart("slope estimate needs a feasible base state")
    spec = h0.spec
    dx = spec.dx
    rng = np.random.default_rng(seed)
    candidates: list[np.ndarray] = []

    grad = functional_height_gradient(h0, rule)
    gnorm = np.sqrt(np.sum(grad**2) * dx)
    if gnorm > 0.0:
        for eps in (1e-2, 1e-3, 1e-4):
            candidates.append(project_mean_zero(h0.values - eps * grad / gnorm))
    w0 = np.log(slopes(h0))
    for _ in range(n_probes):
        xi = random_logslope(spec, rng, amplitude=amplitude).w
        candidates.append(heights_from_logslope(spec, normalize_logslope(spec, w0 + xi)))

    best = 0.0
    for values in candidates:
        try:
            v = HeightProfile.from_values(spec, values)
        except Exception:
            continue
        fv = driving_functional(v, rule)
        if not fv.is_finite:
            continue
        dist = np.sqrt(np.sum((h0.values - v.values) ** 2) * dx)
        if dist == 0.0:
            continue
        best = max(best, max(val0.value - fv.value, 0.0) / dist)
    return float(best)


def lipschitz_estimate(
    traj: Trajectory,
    rule: ThresholdRule | None = None,
    n_probes: int = 100,
    seed: int = 0,
) -> LipschitzReport:
    """Max step rate ``||h_{n+1}-h_n|| / tau`` plus the slope estimate at h(0)."""
    if len(traj.states) < 2:
        raise ValueError("need at least two snapshots")
    dx = traj.states[0].spec.dx
    max_rate = 0.0
    for k in range(len(traj.states) - 1):
        dt = traj.times[k + 1] - traj.times[k]
        diff = traj.states[k + 1].values - traj.states[k].values
        max_rate = max(max_rate, np.sqrt(np.sum(diff**2) * dx) / dt)
    slope = local_slope_estimate(traj.states[0], rule, n_probes=n_probes, seed=seed)
    return LipschitzReport(max_step_rate=float(max_rate), local_slope_estimate=slope)
