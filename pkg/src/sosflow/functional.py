"""Discrete energy, driving functional, BV-ball indicator and probes.

The driving functional integrates ``exp(-q)`` over the distributed part of
the log-slope curvature; nodes flagged as carrying a concentrated positive
mass contribute with a zero exponent, and any flagged negative mass makes
the state infeasible (value +inf).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleProbe, NonMonotone
from .grid import HeightProfile, ThresholdRule, curvature, slopes

NEGATIVE_SINGULAR = "negative_singular"
NON_MONOTONE = "non_monotone"


@dataclass(frozen=True)
class FunctionalValue:
    """Value of the driving functional; +inf carries the infeasibility tag."""

    value: float
    infeasible_reason: str | None = None

    def __post_init__(self):
        finite = np.isfinite(self.value)
        if finite == (self.infeasible_reason is not None):
            raise ValueError("value is finite iff no infeasibility reason is set")

    @property
    def is_finite(self) -> bool:
        return self.infeasible_reason is None


@dataclass(frozen=True)
class BvBallSpec:
    """Radius of the total-variation ball constraining the slope field."""

    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0):
            raise ValueError("ball radius must be positive")


def surface_energy(h: HeightProfile) -> float:
    """Logarithmically corrected surface energy, ``sum(u ln u) * dx``."""
    u = slopes(h)
    return float(np.sum(u * np.log(u)) * h.spec.dx)


def driving_functional(h: HeightProfile, rule: ThresholdRule) -> FunctionalValue:
    """Total function: finite value, or +inf tagged with the reason."""
    try:
        dec = curvature(h, rule)
    except NonMonotone:
        return FunctionalValue(np.inf, NON_MONOTONE)
    if np.any(dec.flagged & (dec.q < 0.0)):
        return FunctionalValue(np.inf, NEGATIVE_SINGULAR)
    dx = h.spec.dx
    value = float(np.sum(np.exp(-dec.q[~dec.flagged])) * dx + np.count_nonzero(dec.flagged) * dx)
    return FunctionalValue(value)


def slope_total_variation(h: HeightProfile) -> float:
    """Discrete total variation of the slope field (the measure norm of h_xx)."""
    u = slopes(h)
    return float(np.sum(np.abs(u - np.roll(u, 1))))


def logslope_total_variation(h: HeightProfile) -> float:
    """Discrete total variation of ln h_x, ``sum |q_i| dx``."""
    w = np.log(slopes(h))
    return float(np.sum(np.abs(w - np.roll(w, 1))))


def bv_ball_indicator(h: HeightProfile, ball: BvBallSpec) -> float:
    """0 when the slope TV fits inside the ball, +inf otherwise."""
    try:
        tv = slope_total_variation(h)
    except NonMonotone:
        return np.inf
    return 0.0 if tv <= ball.radius else np.inf


def chemical_potential(h: HeightProfile, rule: ThresholdRule) -> np.ndarray:
    """Variational derivative of the surface energy: minus the regular curvature.

    Flagged nodes report zero; their concentrated mass is listed by the
    decomposition returned from :func:`sosflow.grid.curvature`.
    """
    return -curvature(h, rule).regular


def proximal_objective(
    tau: float,
    anchor: HeightProfile,
    candidate: HeightProfile,
    ball: BvBallSpec,
    rule: ThresholdRule,
) -> float:
    """Backward-Euler objective: functional + indicator + quadratic tether."""
    if not (tau > 0.0):
        raise ValueError("tau must be positive")
    val = driving_functional(candidate, rule)
    if not val.is_finite:
        return np.inf
    if bv_ball_indicator(candidate, ball) != 0.0:
        return np.inf
    diff = candidate.values - anchor.values
    return val.value + float(np.sum(diff**2) * candidate.spec.dx) / (2.0 * tau)


def functional_height_gradient(h: HeightProfile, rule: ThresholdRule) -> np.ndarray:
    """Euclidean gradient of the driving functional in node-height variables.

    Flagged nodes keep their concentrated mass frozen, so their cell enters
    the flux with a unit weight; this is what makes the concentrated part
    latent.  The result telescopes to zero, hence it is tangent to the
    mean-zero constraint.
    """
    dec = curvature(h, rule)
    u = slopes(h)
    dx = h.spec.dx
    g = np.exp(-dec.regular)
    # flux on half-node i+1/2 between curvature nodes i and i+1
    flux = (np.roll(g, -1) - g) / (dx * u)
    return np.roll(flux, 1) - flux


def convexity_probe(
    u: HeightProfile,
    v: HeightProfile,
    rule: ThresholdRule,
    samples: int = 11,
) -> float:
    """Maximum convexity violation of the functional along the height segment.

    Returns ``max_t f((1-t)u + tv) - [(1-t)f(u) + t f(v)]`` over a uniform
    sample of t in [0, 1].  Non-positive supports convexity along the
    segment; a positive value is reported, never raised.
    """
    fu = driving_functional(u, rule).value
    fv = driving_functional(v, rule).value
    if not (np.isfinite(fu) and np.isfinite(fv)):
        raise InfeasibleProbe("convexity probe endpoints must have finite functional")
    worst = -np.inf
    gap = v.values - u.values  # interpolation form is exact when u == v
    for t in np.linspace(0.0, 1.0, samples):
        mid = HeightProfile(u.spec, u.values + t * gap)
        fm = driving_functional(mid, rule).value
        worst = max(worst, fm - (fu + t * (fv - fu)))
    return float(worst)
