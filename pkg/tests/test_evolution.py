import numpy as np
import pytest

from sosflow import (
    EvolutionConfig,
    GridSpec,
    InfeasibleStart,
    ThresholdRule,
    derive_bounds,
    driving_functional,
    evolve,
    linear_profile,
    lipschitz_estimate,
    sine_profile,
)

from conftest import two_piece_kink


class TestDeriveBounds:
    def test_linear_unit_period(self, spec64, rule):
        b = derive_bounds(linear_profile(spec64), rule)
        assert b.phi0 == pytest.approx(1.0, abs=1e-12)
        assert b.c1 == pytest.approx(np.exp(-2.0), rel=1e-12)
        assert b.c2 == pytest.approx(np.exp(2.0), rel=1e-12)
        assert b.c_star == pytest.approx(2.0 * np.exp(2.0) + 1.0, rel=1e-12)

    def test_linear_period_two(self, rule):
        b = derive_bounds(linear_profile(GridSpec(8, 2.0)), rule)
        assert b.phi0 == pytest.approx(2.0, abs=1e-12)
        assert b.c1 == pytest.approx(np.exp(-4.0) / 2.0, rel=1e-12)
        assert b.c2 == pytest.approx(np.exp(4.0) / 2.0, rel=1e-12)

    def test_override_wins(self, spec64, rule):
        b = derive_bounds(linear_profile(spec64), rule, c_star_override=7.0)
        assert b.c_star == 7.0

    def test_infeasible_initial_data(self, rule):
        with pytest.raises(InfeasibleStart):
            derive_bounds(two_piece_kink(64), rule)

    def test_slope_window_straddles_mean_slope(self, spec64, rule):
        h = sine_profile(spec64, 0.01, 1)
        b = derive_bounds(h, rule)
        assert b.c1 <= 1.0 / spec64.length <= b.c2


class TestEvolve:
    def test_stationary_state_stays_put(self, spec64):
        h0 = linear_profile(spec64)
        traj = evolve(h0, EvolutionConfig(t_final=1e-2, n_steps=8))
        for state in traj.states:
            assert np.max(np.abs(state.values - h0.values)) <= 1e-8

    def test_sine_run_invariants(self, spec64, rule):
        h0 = sine_profile(spec64, 0.01, 1)
        cfg = EvolutionConfig(t_final=1e-3, n_steps=32)
        traj = evolve(h0, cfg)
        grad_tol = cfg.inner.grad_tol
        b = traj.bounds
        phis = [d.phi for d in traj.diagnostics]
        assert all(b2 <= a + 10 * grad_tol for a, b2 in zip(phis[:-1], phis[1:]))
        assert phis[-1] < phis[0]
        masses = [d.mass for d in traj.diagnostics]
        assert max(abs(m - masses[0]) for m in masses) <= 1e-12
        for d in traj.diagnostics:
            assert d.min_slope >= b.c1 * (1 - 1e-6)
            assert d.max_slope <= b.c2 * (1 + 1e-6)
            assert d.tv_logslope <= 2 * b.phi0 + 1e-6
        # energy-dissipation sum against the total functional drop
        total = 0.0
        for k, rep in enumerate(traj.reports):
            diff = traj.states[k + 1].values - traj.states[k].values
            total += np.sum(diff**2) * spec64.dx / rep.tau_used
        assert total <= phis[0] - phis[-1] + len(traj.reports) * 10 * grad_tol

    def test_final_time_is_exact(self, spec64):
        h0 = sine_profile(spec64, 0.01, 1)
        traj = evolve(h0, EvolutionConfig(t_final=1e-3, n_steps=7))
        assert traj.times[-1] == pytest.approx(1e-3, abs=1e-15)
        assert np.all(np.diff(traj.times) > 0)

    def test_snapshot_stride(self, spec64):
        h0 = sine_profile(spec64, 0.01, 1)
        traj = evolve(h0, EvolutionConfig(t_final=1e-3, n_steps=8, snapshot_every=4))
        assert traj.snapshot_steps == [0, 4, 8]
        assert len(traj.states) == 3
        assert len(traj.reports) == 8
        assert len(traj.diagnostics) == 9

    def test_self_convergence_in_step_count(self, spec64):
        # halving tau roughly halves the endpoint error (first order)
        h0 = sine_profile(spec64, 0.01, 1)
        finals = {}
        for n in (32, 64, 128):
            traj = evolve(h0, EvolutionConfig(t_final=1e-3, n_steps=n, snapshot_every=n))
            finals[n] = traj.states[-1].values
        d1 = np.sqrt(np.sum((finals[32] - finals[64]) ** 2) * spec64.dx)
        d2 = np.sqrt(np.sum((finals[64] - finals[128]) ** 2) * spec64.dx)
        assert d1 / d2 >= 1.7

    def test_ball_never_active_under_derived_radius(self, spec64, rule):
        from sosflow import slope_total_variation

        h0 = sine_profile(spec64, 0.01, 1)
        traj = evolve(h0, EvolutionConfig(t_final=1e-3, n_steps=16))
        for state in traj.states:
            assert slope_total_variation(state) <= traj.bounds.c_star - 1.0 + 1e-6


class TestLipschitzEstimate:
    def test_stationary_trajectory_rate_is_zero(self, spec64):
        traj = evolve(linear_profile(spec64), EvolutionConfig(t_final=1e-3, n_steps=4))
        rep = lipschitz_estimate(traj, n_probes=20, seed=1)
        assert rep.max_step_rate <= 1e-7

    def test_rate_bounded_by_slope_estimate(self, spec64, rule):
        h0 = sine_profile(spec64, 0.01, 1)
        traj = evolve(h0, EvolutionConfig(t_final=1e-3, n_steps=32))
        rep = lipschitz_estimate(traj, rule, n_probes=100, seed=2)
        assert rep.max_step_rate <= 1.5 * rep.local_slope_estimate

    def test_halving_tau_keeps_rate_stable(self, spec64, rule):
        h0 = sine_profile(spec64, 0.01, 1)
        r1 = lipschitz_estimate(
            evolve(h0, EvolutionConfig(t_final=1e-3, n_steps=32)), rule, n_probes=10, seed=3
        )
        r2 = lipschitz_estimate(
            evolve(h0, EvolutionConfig(t_final=1e-3, n_steps=64)), rule, n_probes=10, seed=3
        )
        assert r2.max_step_rate <= 1.10 * r1.max_step_rate
