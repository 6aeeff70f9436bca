"""Distortion, transmit power and PAPR of a tuned transmission block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBlockError

DB_FLOOR = -200.0  # dB stand-in for an exact-zero linear value


def db10(value, floor=DB_FLOOR):
    """10*log10 with a numeric floor for exact zeros.

    Returns (db, floored) where ``floored`` marks a value clamped at the
    floor because the linear input was zero.
    """
    if value < 0.0:
        raise ValueError("dB conversion of a negative value")
    if value == 0.0:
        return floor, True
    return float(10.0 * np.log10(value)), False


@dataclass(frozen=True)
class SymbolBlock:
    """Information symbols for one channel realization, one column per interval."""

    symbols: np.ndarray  # (K, N) complex

    def __post_init__(self):
        if self.symbols.ndim != 2 or self.symbols.shape[1] < 1:
            raise ValueError("symbols must be a K x N matrix with N >= 1")

    @property
    def num_intervals(self):
        return self.symbols.shape[1]


@dataclass(frozen=True)
class TransmitBlock:
    """Transmit signals x(n) together with the feed gains that formed them."""

    x: np.ndarray      # (M, N) complex
    gains: np.ndarray  # (N,) real feed gains


def transmit_block(surface, feed_power, w_block, gains):
    """Build x(n) = gain(n) * sqrt(P) * diag(surface) @ w(n) for a block."""
    gains = np.asarray(gains, dtype=float)
    coeffs = surface.complex_coeffs()
    x = np.sqrt(feed_power) * coeffs[:, None] * np.asarray(w_block) * gains[None, :]
    return TransmitBlock(x, gains)


def received_mse(symbols, post_gains, channel_matrix, x, noise_var):
    """Received mean squared error ||s - G H x||^2 + ||G||_F^2 * noise_var."""
    symbols = np.asarray(symbols)
    x = np.asarray(x)
    gains = np.asarray(post_gains.gains)
    if noise_var < 0.0:
        raise ValueError("noise_var must be nonnegative")
    if channel_matrix.shape != (symbols.shape[0], x.shape[0]):
        raise ValueError(
            f"channel shape {channel_matrix.shape} does not link "
            f"{x.shape[0]} inputs to {symbols.shape[0]} users"
        )
    residual = symbols - (gains[:, None] * channel_matrix) @ x
    return float(np.sum(np.abs(residual) ** 2) + np.sum(np.abs(gains) ** 2) * noise_var)


def distortion(symbol_block, post_gains, channel_matrix, x_block):
    """Noise-free per-user distortion, averaged over the block.

    (1/K)(1/N) * sum_n ||s(n) - G H x(n)||^2, returned in linear scale.
    """
    s = symbol_block.symbols
    x = x_block.x
    if x.shape[1] != s.shape[1]:
        raise ValueError("symbol and transmit blocks differ in length")
    gains = np.asarray(post_gains.gains)
    if channel_matrix.shape != (s.shape[0], x.shape[0]):
        raise ValueError("channel dimensions do not match the blocks")
    residual = s - (gains[:, None] * channel_matrix) @ x
    num_users, num_intervals = s.shape
    return float(np.sum(np.abs(residual) ** 2) / (num_users * num_intervals))


def average_power(gains, feed_power):
    """Average transmit power (1/N) * sum_n gain(n)^2 * P."""
    gains = np.asarray(gains, dtype=float)
    if gains.size < 1:
        raise ValueError("need at least one interval")
    return float(np.mean(np.abs(gains) ** 2) * feed_power)


def papr(gains, feed_power):
    """Peak-to-average power ratio max_n gain(n)^2 * P / P_avg, >= 1."""
    gains = np.asarray(gains, dtype=float)
    if gains.size < 1:
        raise ValueError("need at least one interval")
    if not np.any(gains):
        raise DegenerateBlockError("all feed gains are zero")
    powers = np.abs(gains) ** 2 * feed_power
    return float(np.max(powers) / np.mean(powers))


@dataclass(frozen=True)
class TrialResult:
    """Metrics of one channel realization for one transmission scheme."""

    scheme: str
    d_linear: float
    d_db: float
    d_db_floored: bool
    p_out: float
    papr_linear: float
    papr_db: float
    iterations_mean: float
    converged_fraction: float
    negative_gain_events: int


def trial_result(scheme, d_linear, p_out, papr_linear,
                 iterations_mean=float("nan"), converged_fraction=float("nan"),
                 negative_gain_events=0):
    """Assemble a TrialResult, deriving the dB forms."""
    d_db, floored = db10(d_linear)
    papr_db, _ = db10(papr_linear)
    return TrialResult(
        scheme=scheme,
        d_linear=float(d_linear),
        d_db=d_db,
        d_db_floored=floored,
        p_out=float(p_out),
        papr_linear=float(papr_linear),
        papr_db=papr_db,
        iterations_mean=float(iterations_mean),
        converged_fraction=float(converged_fraction),
        negative_gain_events=int(negative_gain_events),
    )
