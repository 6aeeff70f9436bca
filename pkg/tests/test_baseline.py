import numpy as np
import pytest

from ristx.baseline import mf_post_gains, mf_precode, mf_precode_block
from ristx.channel import UserLargeScale
from ristx.errors import DegenerateDirectionError
from ristx.metrics import SymbolBlock, TransmitBlock, distortion


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def user(shadowing=1.0, r_norm=1.0, nu=3.2):
    return UserLargeScale(
        distance=100.0 * r_norm,
        normalized_distance=r_norm,
        shadowing=shadowing,
        path_loss_exponent=nu,
        reference_distance=100.0,
    )


class TestPrecode:
    def test_zero_target_gives_zero_vector(self):
        h = np.array([[1.0 + 0j, 2.0 + 0j]])
        x = mf_precode(h, np.array([2.0 + 0j]), 0.0)
        assert np.array_equal(x, np.zeros(2, dtype=complex))

    def test_hand_value(self):
        h = np.array([[1.0 + 0j, 0.0 + 0j]])
        x = mf_precode(h, np.array([2.0 + 0j]), 4.0)
        assert np.allclose(x, [2.0, 0.0], atol=1e-15)

    def test_power_match_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            h = crandn(rng, 3, 6)
            s = crandn(rng, 3)
            target = float(rng.uniform(0.1, 10.0))
            x = mf_precode(h, s, target)
            assert np.real(np.vdot(x, x)) == pytest.approx(target, rel=1e-12)

    def test_direction_is_nonnegative_multiple(self):
        rng = np.random.default_rng(1)
        h = crandn(rng, 2, 5)
        s = crandn(rng, 2)
        x = mf_precode(h, s, 3.0)
        d = h.conj().T @ s
        scale = np.real(np.vdot(d, x)) / np.real(np.vdot(d, d))
        assert scale > 0
        assert np.allclose(x, scale * d, rtol=1e-12)

    def test_degenerate_direction_raises(self):
        h = np.array([[1.0 + 0j], [-1.0 + 0j]])
        s = np.array([1.0 + 0j, 1.0 + 0j])
        with pytest.raises(DegenerateDirectionError):
            mf_precode(h, s, 1.0)
        assert np.array_equal(mf_precode(h, s, 0.0), np.zeros(1, dtype=complex))

    def test_negative_target_rejected(self):
        with pytest.raises(ValueError):
            mf_precode(np.eye(2, dtype=complex), np.ones(2), -1.0)

    def test_block_matches_per_interval(self):
        rng = np.random.default_rng(2)
        h = crandn(rng, 3, 7)
        s = crandn(rng, 3, 9)
        targets = rng.uniform(0.1, 4.0, 9)
        x_block, scales = mf_precode_block(h, s, targets)
        for n in range(9):
            assert np.allclose(x_block[:, n], mf_precode(h, s[:, n], targets[n]),
                               rtol=1e-12)
        assert np.all(scales > 0)


class TestPostGains:
    def test_unit_case(self):
        g = mf_post_gains([user()], 1, 1.0)
        assert g.gains[0] == 1.0

    def test_doubling_mean_scale_halves_gains(self):
        users = [user(shadowing=2.0, r_norm=3.0), user()]
        g1 = mf_post_gains(users, 16, 1.0)
        g2 = mf_post_gains(users, 16, 2.0)
        assert np.array_equal(g2.gains, g1.gains / 2.0)

    def test_nonpositive_mean_scale(self):
        with pytest.raises(ValueError):
            mf_post_gains([user()], 4, 0.0)

    def test_single_user_expectation_recovers_symbol(self):
        # noise-free K=1: mean of G*y over fading draws and intervals tends
        # to the symbol itself (2% tolerance at 1e4 samples)
        rng = np.random.default_rng(3)
        m = 4
        ls = [user(shadowing=2.0, r_norm=1.5)]
        rho = ls[0].shadowing / ls[0].normalized_distance**3.2
        s = np.array([1.5 - 0.5j])
        draws = 2500
        intervals = 4
        collected = []
        for _ in range(draws):
            h = crandn(rng, 1, m)
            channel = np.sqrt(rho) * h
            targets = rng.uniform(0.5, 2.0, intervals)
            s_block = np.tile(s[:, None], (1, intervals))
            x, scales = mf_precode_block(channel, s_block, targets)
            g = mf_post_gains(ls, m, float(np.mean(scales)))
            y = channel @ x
            collected.append((g.gains[0] * y[0]).mean())
        mean = np.mean(collected)
        assert abs(mean - s[0]) < 0.02 * abs(s[0])

    def test_shared_distortion_code_path(self):
        # benchmark metrics run through the same distortion operation
        rng = np.random.default_rng(4)
        h = crandn(rng, 2, 6)
        s = crandn(rng, 2, 5)
        x, scales = mf_precode_block(h, s, np.full(5, 2.0))
        g = mf_post_gains([user(), user()], 6, float(np.mean(scales)))
        d = distortion(SymbolBlock(s), g, h, TransmitBlock(x, scales))
        assert np.isfinite(d) and d >= 0.0
