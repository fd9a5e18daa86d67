"""One backward-Euler (proximal) step of the gradient flow, solved in log-slope
coordinates.

The inner problem minimizes ``functional + ||h(w) - anchor||^2 / (2 tau)``
over half-node fields w subject to ``sum(exp(w)) * dx = 1``.  Working in w
keeps every iterate monotone; the constraint is a smooth manifold handled by
tangent projection plus an exact retraction (a constant shift of w).

Nodes flagged singular on the anchor keep their concentrated curvature mass
frozen for the duration of the step: their cell contributes
``dx * exp(-(q - q_anchor))``, so the value at the anchor matches the
functional and the gradient sees a unit flux weight there, which is what
leaves the concentrated part latent.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InfeasibleStart, NoDecrease
from .functional import BvBallSpec, bv_ball_indicator, driving_functional
from .grid import (
    HeightProfile,
    LogSlopeField,
    ThresholdRule,
    curvature,
    heights_from_logslope,
    slopes,
)

ARMIJO_C1 = 1e-4
MIN_LINESEARCH_STEP = 2.0**-45
HESSIAN_FLOOR = 1e-8
STATIONARY_FLOOR = 4.0 * np.finfo(float).eps


@dataclass(frozen=True)
class InnerSolverConfig:
    """Tolerances for the projected Newton inner solver.

    ``grad_tol`` bounds the tangent gradient 2-norm divided by
    ``max(1, |objective|)``.  An iterate whose predicted Newton decrease
    falls below the floating-point resolution of the objective is also
    accepted as stationary: near stiff minima the gradient floor reachable
    in double precision scales like ``sqrt(eps |f| lambda_max)`` and can sit
    above any fixed tolerance.
    """

    grad_tol: float = 1e-10
    max_iter: int = 200
    tau_backoff: float = 0.5
    max_backoffs: int = 20
    constraint_tol: float = 1e-12

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.max_iter > 0 and self.max_backoffs > 0):
            raise ValueError("tolerances and iteration caps must be positive")
        if not (0.0 < self.tau_backoff < 1.0):
            raise ValueError("tau_backoff must lie in (0, 1)")
        if not (self.constraint_tol > 0):
            raise ValueError("constraint_tol must be positive")


@dataclass(frozen=True)
class StepReport:
    """Outcome of one proximal step."""

    tau_used: float
    iterations: int
    objective_before: float
    objective_after: float
    decrease: float
    backoffs: int
    converged: bool


@lru_cache(maxsize=32)
def _mix_matrix(n: int) -> np.ndarray:
    """Linear map from cell increments to mean-zero heights.

    ``h = M @ e - 1/(2n)`` where ``e_j = dx * exp(w_j)``; row i of M is
    ``[j < i] - (n-1-j)/n``.
    """
    lower = np.tril(np.ones((n, n)), k=-1)
    col = (n - 1 - np.arange(n)) / n
    m = lower - col[None, :]
    m.setflags(write=False)
    return m


class _FrozenObjective:
    """Smooth inner objective with the anchor's flag set and masses frozen."""

    def __init__(
        self,
        anchor: HeightProfile,
        tau: float,
        ball: BvBallSpec,
        rule: ThresholdRule,
    ):
        self.spec = anchor.spec
        self.anchor = anchor.values
        self.tau = float(tau)
        self.ball = ball
        dec = curvature(anchor, rule)
        self.flags = dec.flagged
        self.q0 = np.where(dec.flagged, dec.q, 0.0)
        self.dx = self.spec.dx
        self.mix = _mix_matrix(self.spec.n)

    # -- pieces ---------------------------------------------------------

    def _cell_terms(self, w: np.ndarray) -> np.ndarray:
        q = (w - np.roll(w, 1)) / self.dx
        with np.errstate(over="ignore"):  # inf objective means "reject the trial"
            return self.dx * np.exp(-(q - self.q0))

    def heights(self, w: np.ndarray) -> np.ndarray:
        return heights_from_logslope(self.spec, w)

    def smooth_value(self, w: np.ndarray) -> float:
        s = self._cell_terms(w)
        r = self.heights(w) - self.anchor
        return float(s.sum() + np.sum(r**2) * self.dx / (2.0 * self.tau))

    def indicator(self, w: np.ndarray) -> float:
        u = np.exp(w)
        tv = float(np.sum(np.abs(u - np.roll(u, 1))))
        return 0.0 if tv <= self.ball.radius else np.inf

    def value(self, w: np.ndarray) -> float:
        return self.smooth_value(w) + self.indicator(w)

    def gradient(self, w: np.ndarray) -> np.ndarray:
        s = self._cell_terms(w)
        g_fun = (np.roll(s, -1) - s) / self.dx
        e = self.dx * np.exp(w)
        r = self.heights(w) - self.anchor
        g_prox = e * (self.mix.T @ r) * self.dx / self.tau
        return g_fun + g_prox

    def hessian(self, w: np.ndarray) -> np.ndarray:
        n = self.spec.n
        s = self._cell_terms(w)
        hess = np.zeros((n, n))
        idx = np.arange(n)
        hess[idx, idx] = (s + np.roll(s, -1)) / self.dx**2
        hess[idx, idx - 1] -= s / self.dx**2
        hess[idx - 1, idx] -= s / self.dx**2
        e = self.dx * np.exp(w)
        jac = self.mix * e[None, :]
        r = self.heights(w) - self.anchor
        hess += (jac.T @ jac) * self.dx / self.tau
        hess[idx, idx] += e * (self.mix.T @ r) * self.dx / self.tau
        return hess

    def constraint_normal(self, w: np.ndarray) -> np.ndarray:
        return self.dx * np.exp(w)

    def retract(self, w: np.ndarray) -> np.ndarray:
        # log-sum-exp keeps the shift finite for wild trial points
        peak = float(np.max(w))
        return w - (peak + np.log(np.sum(np.exp(w - peak)) * self.dx))


def _tangent(g: np.ndarray, normal: np.ndarray) -> np.ndarray:
    return g - (g @ normal) / (normal @ normal) * normal


def objective_value(
    w: np.ndarray,
    anchor: HeightProfile,
    tau: float,
    ball: BvBallSpec,
    rule: ThresholdRule,
) -> float:
    """Inner objective as a plain function of w (used by gradient checks)."""
    return _FrozenObjective(anchor, tau, ball, rule).value(np.asarray(w, dtype=float))


def reduced_gradient(
    w: LogSlopeField | np.ndarray,
    anchor: HeightProfile,
    tau: float,
    rule: ThresholdRule,
    ball: BvBallSpec | None = None,
) -> np.ndarray:
    """Tangent-projected gradient of the inner objective with respect to w.

    The indicator part of the objective contributes nothing where it is
    finite, so the ball enters only through feasibility of the point itself.
    """
    warr = w.w if isinstance(w, LogSlopeField) else np.asarray(w, dtype=float)
    obj = _FrozenObjective(anchor, tau, ball or BvBallSpec(np.inf), rule)
    g = obj.gradient(warr)
    return _tangent(g, obj.constraint_normal(warr))


def _newton_descent(
    obj: _FrozenObjective, w0: np.ndarray, cfg: InnerSolverConfig
) -> tuple[np.ndarray, float, int, bool]:
    """Safeguarded projected Newton from w0; returns (w, value, iters, converged)."""
    w = obj.retract(np.array(w0, dtype=float))
    f = obj.value(w)
    iters = 0
    for _ in range(cfg.max_iter):
        g = obj.gradient(w)
        normal = obj.constraint_normal(w)
        g_t = _tangent(g, normal)
        scale = max(1.0, abs(f))
        if np.linalg.norm(g_t) <= cfg.grad_tol * scale:
            return w, f, iters, True
        hess = obj.hessian(w)
        mult = (g @ normal) / (normal @ normal)
        hess = hess - mult * np.diag(normal)
        unit = normal / np.linalg.norm(normal)
        proj = np.eye(w.size) - np.outer(unit, unit)
        hess_t = proj @ hess @ proj
        vals, vecs = np.linalg.eigh(hess_t)
        floor = HESSIAN_FLOOR * max(float(np.max(np.abs(vals))), 1e-300)
        coeff = vecs.T @ g_t
        step = -vecs @ (coeff / np.clip(vals, floor, None))
        slope = float(g_t @ step)
        if slope >= 0.0:  # indefinite fallback
            step = -g_t
            slope = -float(g_t @ g_t)
        if abs(slope) <= STATIONARY_FLOOR * scale:
            # the predicted decrease is smaller than one representable ulp of
            # the objective: the iterate sits at the floating-point bottom of
            # the basin and no certifiable progress remains
            return w, f, iters, True
        alpha = 1.0
        accepted = False
        while alpha >= MIN_LINESEARCH_STEP:
            w_try = obj.retract(w + alpha * step)
            f_try = obj.value(w_try)
            if np.isfinite(f_try) and f_try <= f + ARMIJO_C1 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # numerically stationary when even the full predicted decrease
            # is below rounding noise of the objective
            stationary = abs(slope) <= STATIONARY_FLOOR * scale
            return w, f, iters, stationary
        w, f = w_try, f_try
        iters += 1
    g_t = _tangent(obj.gradient(w), obj.constraint_normal(w))
    return w, f, iters, np.linalg.norm(g_t) <= cfg.grad_tol * max(1.0, abs(f))


def resolvent_step(
    h: HeightProfile,
    tau: float,
    ball: BvBallSpec,
    rule: ThresholdRule,
    cfg: InnerSolverConfig | None = None,
) -> tuple[HeightProfile, StepReport]:
    """Solve one proximal step from anchor h with nominal step size tau.

    The returned report records the step size actually used; tau is halved
    up to ``cfg.max_backoffs`` times when the inner solver stalls.  Raises
    ``InfeasibleStart`` when h itself has infinite objective and
    ``NoDecrease`` when every back-off fails.
    """
    cfg = cfg or InnerSolverConfig()
    if not (tau > 0.0):
        raise ValueError("tau must be positive")
    start = driving_functional(h, rule)
    if not start.is_finite:
        raise InfeasibleStart(f"anchor has infinite functional ({start.infeasible_reason})")
    if bv_ball_indicator(h, ball) != 0.0:
        raise InfeasibleStart("anchor violates the BV ball")

    w0 = np.log(slopes(h))
    tau_try = float(tau)
    for backoffs in range(cfg.max_backoffs + 1):
        obj = _FrozenObjective(h, tau_try, ball, rule)
        before = obj.value(w0)
        w, after, iters, converged = _newton_descent(obj, w0, cfg)
        if converged:
            heights = obj.heights(w)
            defect = abs(np.sum(np.exp(w)) * obj.dx - 1.0)
            if defect > cfg.constraint_tol:
                w = obj.retract(w)
                heights = obj.heights(w)
            result = HeightProfile(h.spec, heights)
            report = StepReport(
                tau_used=tau_try,
                iterations=iters,
                objective_before=float(before),
                objective_after=float(after),
                decrease=float(before - after),
                backoffs=backoffs,
                converged=True,
            )
            return result, report
        tau_try *= cfg.tau_backoff
    raise NoDecrease(
        f"no decreasing proximal step after {cfg.max_backoffs} back-offs "
        f"(last tau {tau_try / cfg.tau_backoff:.3e})"
    )
