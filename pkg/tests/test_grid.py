import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sosflow import (
    GridSpec,
    HeightProfile,
    LogSlopeField,
    NonMonotone,
    NotNormalized,
    ThresholdRule,
    curvature,
    linear_profile,
    log_slope_field,
    reconstruct,
    slopes,
)
from sosflow.grid import normalize_logslope, project_mean_zero, random_logslope

from conftest import random_profile, two_piece_kink

LN3 = np.log(3.0)


def cumulative_profile(spec, u):
    """Independent construction: plain-Python cumulative sum, then projection."""
    h = [0.0]
    for ui in u[:-1]:
        h.append(h[-1] + ui * spec.dx)
    h = np.array(h)
    return h - (h.sum() + 0.5) / spec.n


class TestGridSpec:
    def test_dx(self):
        assert GridSpec(8, 2.0).dx == 0.25

    @pytest.mark.parametrize("n,length", [(3, 1.0), (0, 1.0), (8, 0.0), (8, -1.0)])
    def test_rejects_bad_parameters(self, n, length):
        with pytest.raises(ValueError):
            GridSpec(n, length)


class TestSlopes:
    def test_linear_profile(self, spec4):
        h = HeightProfile(spec4, [-0.5, -0.25, 0.0, 0.25])
        assert np.array_equal(slopes(h), np.ones(4))

    def test_non_monotone_raises(self, spec4):
        h = HeightProfile(spec4, [-0.25, -0.375, 0.25, 0.375])
        with pytest.raises(NonMonotone):
            slopes(h)

    def test_alternating_slopes(self, spec4):
        u = np.array([0.5, 1.5, 0.5, 1.5])
        h = HeightProfile(spec4, cumulative_profile(spec4, u))
        got = slopes(h)
        np.testing.assert_allclose(got, u, atol=1e-14)
        assert abs(got.sum() * spec4.dx - 1.0) < 1e-10

    def test_normalization_on_random_profiles(self, spec64):
        rng = np.random.default_rng(0)
        for _ in range(50):
            h = random_profile(spec64, rng)
            assert abs(slopes(h).sum() * spec64.dx - 1.0) < 1e-10


class TestLogSlopeField:
    def test_linear_is_zero(self, spec4):
        assert np.array_equal(log_slope_field(linear_profile(spec4)).w, np.zeros(4))

    def test_componentwise_log(self, spec4):
        u = np.array([0.5, 1.5, 0.5, 1.5])
        h = HeightProfile.from_slopes(spec4, u)
        np.testing.assert_allclose(log_slope_field(h).w, np.log(u), atol=1e-14)

    def test_round_trip_identity(self, spec4):
        rng = np.random.default_rng(1)
        h = random_profile(spec4, rng)
        back = reconstruct(log_slope_field(h))
        np.testing.assert_allclose(back.values, h.values, atol=1e-12)


class TestReconstruct:
    def test_zero_field_gives_linear(self, spec4):
        w = LogSlopeField(spec4, np.zeros(4))
        np.testing.assert_allclose(
            reconstruct(w).values, [-0.5, -0.25, 0.0, 0.25], atol=1e-15
        )

    def test_rejects_unnormalized(self, spec4):
        w = LogSlopeField(spec4, np.full(4, np.log(1.1)))
        with pytest.raises(NotNormalized):
            reconstruct(w)

    def test_alternating_field(self, spec4):
        w = LogSlopeField(spec4, np.log([0.5, 1.5, 0.5, 1.5]))
        expected = cumulative_profile(spec4, np.array([0.5, 1.5, 0.5, 1.5]))
        np.testing.assert_allclose(reconstruct(w).values, expected, atol=1e-14)
        np.testing.assert_allclose(
            reconstruct(w).values, [-0.4375, -0.3125, 0.0625, 0.1875], atol=1e-14
        )

    def test_round_trip_many_random_profiles(self):
        # spec invariant: identity to 1e-12 on 1000 random monotone profiles
        rng = np.random.default_rng(42)
        sizes = [4, 5, 8, 16, 32, 64]
        lengths = [0.5, 1.0, 2.0]
        for k in range(1000):
            spec = GridSpec(sizes[k % len(sizes)], lengths[k % len(lengths)])
            h = random_profile(spec, rng, amplitude=0.4)
            back = reconstruct(log_slope_field(h))
            assert np.max(np.abs(back.values - h.values)) < 1e-12


class TestCurvature:
    def test_linear_no_curvature(self, spec64, rule):
        dec = curvature(linear_profile(spec64), rule)
        assert np.array_equal(dec.q, np.zeros(64))
        assert not dec.flagged.any()
        assert dec.singular_pos_mass == 0.0
        assert dec.singular_neg_mass == 0.0

    def test_alternating_profile(self, spec4, rule):
        h = HeightProfile.from_slopes(spec4, [0.5, 1.5, 0.5, 1.5])
        dec = curvature(h, rule)
        np.testing.assert_allclose(
            dec.q, [-4 * LN3, 4 * LN3, -4 * LN3, 4 * LN3], atol=1e-12
        )
        assert not dec.flagged.any()

    def test_two_piece_kink_masses(self, rule):
        # brute force over nodes: exactly two nonzero q entries, masses +-ln3
        h = two_piece_kink(64)
        dec = curvature(h, rule)
        dx = h.spec.dx
        nonzero = [i for i in range(64) if abs(dec.q[i]) > 1e-12]
        assert len(nonzero) == 2
        masses = sorted(dec.q[i] * dx for i in nonzero)
        np.testing.assert_allclose(masses, [-LN3, LN3], atol=1e-12)
        pos_node = nonzero[0] if dec.q[nonzero[0]] > 0 else nonzero[1]
        assert dec.flagged[pos_node]

    def test_telescoping_mass_balance(self, rule):
        # discrete analogues of the positive/negative balance, to 1e-10
        rng = np.random.default_rng(7)
        for _ in range(200):
            spec = GridSpec(int(rng.integers(4, 65)), float(rng.uniform(0.5, 2.0)))
            h = random_profile(spec, rng, amplitude=0.3)
            dec = curvature(h, rule)
            dx = spec.dx
            assert abs(np.sum(dec.q) * dx) < 1e-10
            pos = np.sum(dec.q[dec.q > 0]) * dx
            neg = -np.sum(dec.q[dec.q < 0]) * dx
            assert abs(pos - neg) < 1e-10
            assert abs(0.5 * np.sum(np.abs(dec.q)) * dx - pos) < 1e-10

    def test_threshold_scaling_flags_concentration(self, rule):
        # a fixed point mass is flagged at every tested refinement level
        for n in (64, 128, 256):
            dec = curvature(two_piece_kink(n), rule)
            assert dec.flagged.sum() == 2
            assert dec.singular_pos_mass == pytest.approx(LN3, abs=1e-12)
            assert dec.singular_neg_mass == pytest.approx(LN3, abs=1e-12)


class TestHeightProfile:
    def test_validate_rejects_bad_mean(self, spec4):
        h = HeightProfile(spec4, [0.0, 0.25, 0.5, 0.75])
        with pytest.raises(ValueError):
            h.validate()

    def test_values_are_read_only(self, spec4):
        h = linear_profile(spec4)
        with pytest.raises(ValueError):
            h.values[0] = 1.0

    def test_from_values_projects(self, spec4):
        h = HeightProfile.from_values(spec4, [0.0, 0.25, 0.5, 0.75], project=True)
        np.testing.assert_allclose(h.values, [-0.5, -0.25, 0.0, 0.25], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    n=st.sampled_from([4, 6, 8, 16, 33]),
    length=st.floats(0.25, 4.0),
    seed=st.integers(0, 10_000),
)
def test_reconstruction_round_trip_property(n, length, seed):
    spec = GridSpec(n, length)
    rng = np.random.default_rng(seed)
    w = normalize_logslope(spec, rng.uniform(-1.0, 1.0, size=n))
    field = LogSlopeField(spec, w)
    h = reconstruct(field)
    h.validate()
    np.testing.assert_allclose(log_slope_field(h).w, w, atol=1e-11)


@settings(max_examples=60, deadline=None)
@given(
    n=st.sampled_from([4, 8, 16, 64]),
    seed=st.integers(0, 10_000),
)
def test_curvature_telescopes_property(n, seed):
    spec = GridSpec(n, 1.0)
    rng = np.random.default_rng(seed)
    h = reconstruct(random_logslope(spec, rng, amplitude=0.5))
    dec = curvature(h, ThresholdRule())
    assert abs(np.sum(dec.q) * spec.dx) < 1e-10
    assert np.array_equal(dec.regular[~dec.flagged], dec.q[~dec.flagged])
    assert np.all(dec.regular[dec.flagged] == 0.0)
