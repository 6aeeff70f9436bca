"""User placement, shadowing, small-scale fading and channel assembly.

All randomness flows through explicitly injected numpy generators; functions
are pure given the generator state, so trials can be produced concurrently
from independently derived streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Cell:
    """Large-scale propagation parameters of the single cell."""

    r_min: float            # minimal (reference) distance, meters
    r_max: float            # outer radius, meters
    path_loss_exponent: float
    shadow_std_db: float

    def __post_init__(self):
        if not self.r_min > 0.0:
            raise ValueError("r_min must be positive")
        if not self.r_max > self.r_min:
            raise ValueError("r_max must exceed r_min")
        if not self.path_loss_exponent > 0.0:
            raise ValueError("path_loss_exponent must be positive")
        if self.shadow_std_db < 0.0:
            raise ValueError("shadow_std_db must be nonnegative")


@dataclass(frozen=True)
class UserLargeScale:
    """Large-scale state of one user."""

    distance: float             # meters
    normalized_distance: float  # distance / reference distance, >= 1
    shadowing: float            # linear-scale log-normal draw, > 0
    path_loss_exponent: float
    reference_distance: float


def large_scale_gains(users):
    """Linear power gains shadowing / r_norm**exponent, one per user."""
    return np.array(
        [u.shadowing / u.normalized_distance**u.path_loss_exponent for u in users]
    )


def draw_users(num_users, cell, rng):
    """Draw user positions and shadowing for one channel realization.

    Distances follow the uniform-area density on the annulus
    [r_min, r_max] (pdf proportional to r); shadowing is log-normal with
    zero dB mean and ``shadow_std_db`` dB standard deviation.
    """
    if num_users < 1:
        raise ValueError("num_users must be positive")
    u = rng.random(num_users)
    distance = np.sqrt(cell.r_min**2 + u * (cell.r_max**2 - cell.r_min**2))
    shadow_db = rng.normal(0.0, cell.shadow_std_db, num_users)
    shadowing = 10.0 ** (shadow_db / 10.0)
    return [
        UserLargeScale(
            distance=float(distance[k]),
            normalized_distance=float(distance[k] / cell.r_min),
            shadowing=float(shadowing[k]),
            path_loss_exponent=cell.path_loss_exponent,
            reference_distance=cell.r_min,
        )
        for k in range(num_users)
    ]


def draw_fading(num_users, num_elements, rng):
    """I.i.d. circularly-symmetric complex normal matrix, unit variance."""
    if num_users < 1 or num_elements < 1:
        raise ValueError("matrix dimensions must be positive")
    shape = (num_users, num_elements)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelRealization:
    """Downlink channel together with the factors that generated it."""

    matrix: np.ndarray        # (K, M) complex channel, large-scale included
    large_scale: tuple        # K UserLargeScale entries
    fading: np.ndarray        # (K, M) small-scale factors


def assemble_channel(large_scale, fading):
    """Scale fading rows by sqrt(shadowing / r_norm**exponent)."""
    fading = np.asarray(fading)
    if fading.ndim != 2 or fading.shape[0] != len(large_scale):
        raise ValueError(
            f"fading shape {fading.shape} does not match {len(large_scale)} users"
        )
    amp = np.sqrt(large_scale_gains(large_scale))
    return ChannelRealization(amp[:, None] * fading, tuple(large_scale), fading)


@dataclass(frozen=True)
class PostGains:
    """Diagonal receive post-processing gains, one scalar per user."""

    gains: np.ndarray

    def frobenius_sq(self):
        return float(np.sum(np.abs(self.gains) ** 2))


def compensating_gains(large_scale):
    """Receive gains that cancel path loss and shadowing exactly.

    Applying these to the assembled channel recovers the pure fading matrix,
    so the single-RF distortion becomes invariant to the large-scale draw.
    """
    return PostGains(1.0 / np.sqrt(large_scale_gains(large_scale)))
