"""State and trajectory diagnostics: invariant records, the variational
inequality tester, directional-derivative checks and the refinement study."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InfeasibleProbe, MonotonicityLost
from .evolution import EvolutionConfig, Trajectory, evolve
from .functional import (
    BvBallSpec,
    bv_ball_indicator,
    convexity_probe,
    driving_functional,
    functional_height_gradient,
)
from .grid import (
    GridSpec,
    HeightProfile,
    ThresholdRule,
    curvature,
    project_mean_zero,
    random_logslope,
    reconstruct,
    slopes,
)
from .resolvent import InnerSolverConfig

CONVEXITY_EXCLUSION_TOL = 1e-8


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of the diagnostics table; field order matches the CSV columns."""

    step: int
    t: float
    phi: float
    mass: float
    l2: float
    min_slope: float
    max_slope: float
    tv_logslope: float
    pos_mass: float
    neg_mass: float
    sing_pos: float
    sing_neg: float
    evi_viol: float | None = None


def record(h: HeightProfile, t: float, rule: ThresholdRule, step: int = 0) -> DiagnosticsRecord:
    """Compute every per-state diagnostic from the grid primitives."""
    u = slopes(h)
    dec = curvature(h, rule)
    dx = h.spec.dx
    val = driving_functional(h, rule)
    return DiagnosticsRecord(
        step=step,
        t=float(t),
        phi=float(val.value),
        mass=h.mass(),
        l2=h.l2_norm(),
        min_slope=float(u.min()),
        max_slope=float(u.max()),
        tv_logslope=float(np.sum(np.abs(dec.q)) * dx),
        pos_mass=float(np.sum(dec.q[dec.q > 0]) * dx),
        neg_mass=float(np.sum(np.abs(dec.q[dec.q < 0])) * dx),
        sing_pos=dec.singular_pos_mass,
        sing_neg=dec.singular_neg_mass,
    )


@dataclass(frozen=True)
class EviReport:
    n_probes: int
    max_violation: float
    worst_probe_id: int
    excluded_nonconvex: int


def evi_test(
    traj: Trajectory,
    probes: Sequence[HeightProfile],
    ball: BvBallSpec,
    rule: ThresholdRule,
) -> EviReport:
    """Step-level variational inequality over every (step, probe) pair.

    For step n and probe v the tested quantity is
    ``<(h_{n+1}-h_n)/tau, h_{n+1}-v> * dx - [f(v) + i_ball(v) - f(h_{n+1})]``;
    pairs whose interpolation segment fails the convexity probe are excluded
    and counted instead of failing.
    """
    if len(probes) < 1:
        raise ValueError("need at least one probe")
    if len(traj.states) < 2:
        raise ValueError("trajectory needs at least two states")
    probe_vals = []
    for j, v in enumerate(probes):
        val = driving_functional(v, rule)
        if not val.is_finite or bv_ball_indicator(v, ball) != 0.0:
            raise InfeasibleProbe(f"probe {j} is outside the feasible set")
        probe_vals.append(val.value)

    dx = traj.states[0].spec.dx
    max_violation = -np.inf
    worst = -1
    excluded = 0
    for k in range(len(traj.states) - 1):
        h_prev = traj.states[k]
        h_next = traj.states[k + 1]
        tau = traj.times[k + 1] - traj.times[k]
        rate = (h_next.values - h_prev.values) / tau
        f_next = driving_functional(h_next, rule).value
        for j, v in enumerate(probes):
            if convexity_probe(h_next, v, rule) > CONVEXITY_EXCLUSION_TOL:
                excluded += 1
                continue
            lhs = float(np.sum(rate * (h_next.values - v.values)) * dx)
            violation = lhs - (probe_vals[j] - f_next)
            if violation > max_violation:
                max_violation = violation
                worst = j
    return EviReport(
        n_probes=len(probes),
        max_violation=float(max_violation),
        worst_probe_id=worst,
        excluded_nonconvex=excluded,
    )


def feasible_probe_profiles(
    spec: GridSpec,
    ball: BvBallSpec,
    rule: ThresholdRule,
    count: int,
    rng: np.random.Generator,
    amplitude: float = 0.2,
) -> list[HeightProfile]:
    """Random smooth feasible states; amplitude is shrunk until each one fits
    inside the ball (feasible by construction, never by rejection)."""
    probes = []
    while len(probes) < count:
        amp = amplitude
        for _ in range(40):
            h = reconstruct(random_logslope(spec, rng, amplitude=amp))
            if (
                driving_functional(h, rule).is_finite
                and bv_ball_indicator(h, ball) == 0.0
            ):
                probes.append(h)
                break
            amp *= 0.5
        else:
            raise InfeasibleProbe("could not build a feasible probe; ball too small")
    return probes


@dataclass(frozen=True)
class DirectionResult:
    direction_id: int
    analytic: float
    forward_quotients: tuple[float, ...]
    backward_quotients: tuple[float, ...]
    observed_order: float
    brackets: bool


@dataclass(frozen=True)
class PerturbationReport:
    results: tuple[DirectionResult, ...]
    max_weak_residual: float | None = None


def perturbation_test(
    h: HeightProfile,
    directions: Sequence[np.ndarray],
    eps_list: Sequence[float],
    rule: ThresholdRule,
    step: tuple[HeightProfile, HeightProfile, float] | None = None,
) -> PerturbationReport:
    """One-sided difference quotients of the functional against the analytic
    directional derivative, with an optional weak-form residual for one
    accepted proximal step ``(h_n, h_{n+1}, tau)``.

    Directions are node samples of smooth periodic fields.  Raises
    ``MonotonicityLost`` when some ``h +- eps*d`` stops being monotone.
    """
    if len(eps_list) < 2:
        raise ValueError("need at least two epsilon values")
    eps_sorted = sorted(eps_list, reverse=True)
    grad = functional_height_gradient(h, rule)
    f0 = driving_functional(h, rule).value
    results = []
    for j, d in enumerate(directions):
        d = np.asarray(d, dtype=float)
        analytic = float(grad @ d)
        fw, bw = [], []
        for eps in eps_sorted:
            for sign, store in ((1.0, fw), (-1.0, bw)):
                values = project_mean_zero(h.values + sign * eps * d)
                try:
                    v = HeightProfile.from_values(h.spec, values)
                except Exception as exc:
                    raise MonotonicityLost(
                        f"direction {j}, eps {eps:g}: perturbed state invalid ({exc})"
                    ) from exc
                fv = driving_functional(v, rule).value
                store.append(sign * (fv - f0) / eps)
        errs = [abs(q - analytic) for q in fw]
        orders = []
        for a, b, ea, eb in zip(errs[:-1], errs[1:], eps_sorted[:-1], eps_sorted[1:]):
            if b > 0 and a > 0:
                orders.append(np.log(a / b) / np.log(ea / eb))
        observed = float(min(orders)) if orders else np.inf
        brackets = bool(fw[-1] >= analytic - 1e-12 >= bw[-1] - 2e-12)
        results.append(
            DirectionResult(
                direction_id=j,
                analytic=analytic,
                forward_quotients=tuple(fw),
                backward_quotients=tuple(bw),
                observed_order=observed,
                brackets=brackets,
            )
        )
    max_residual = None
    if step is not None:
        h_prev, h_next, tau = step
        dx = h.spec.dx
        rate = (h_next.values - h_prev.values) / tau
        grad_next = functional_height_gradient(h_next, rule)
        max_residual = 0.0
        for d in directions:
            d = np.asarray(d, dtype=float)
            residual = float(np.sum(rate * d) * dx + grad_next @ d)
            max_residual = max(max_residual, abs(residual))
    return PerturbationReport(results=tuple(results), max_weak_residual=max_residual)


@dataclass(frozen=True)
class RefinementReport:
    levels: tuple[int, ...]
    neg_masses: tuple[float, ...]
    pos_masses: tuple[float, ...]
    neg_vanishing: bool
    pos_in_band: bool
    records: tuple[DiagnosticsRecord, ...]


def singularity_refinement_study(
    profile_factory: Callable[[int], HeightProfile],
    levels: Sequence[int],
    t_final: float,
    n_steps: int,
    rule: ThresholdRule | None = None,
    inner: InnerSolverConfig | None = None,
) -> RefinementReport:
    """Evolve the same concentrated-curvature data at several resolutions.

    Trend checks: the flagged negative mass of the final state is
    non-increasing across levels and vanishes at the finest one, while the
    flagged positive mass stays within a factor-2 band (the concentrated
    part persists instead of being smoothed away).
    """
    if len(levels) < 2:
        raise ValueError("need at least two refinement levels")
    rule = rule or ThresholdRule()
    inner = inner or InnerSolverConfig()
    finals = []
    for n in levels:
        h0 = profile_factory(int(n))
        cfg = EvolutionConfig(
            t_final=t_final, n_steps=n_steps, inner=inner, rule=rule, snapshot_every=n_steps
        )
        traj = evolve(h0, cfg)
        finals.append(traj.diagnostics[-1])
    neg = tuple(r.sing_neg for r in finals)
    pos = tuple(r.sing_pos for r in finals)
    neg_ok = all(b <= a + 1e-12 for a, b in zip(neg[:-1], neg[1:])) and neg[-1] <= 1e-8
    pos_ok = min(pos) > 0.0 and max(pos) <= 2.0 * min(pos)
    return RefinementReport(
        levels=tuple(int(n) for n in levels),
        neg_masses=neg,
        pos_masses=pos,
        neg_vanishing=bool(neg_ok),
        pos_in_band=bool(pos_ok),
        records=tuple(finals),
    )
