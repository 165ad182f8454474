"""Channel and receiver primitives: Rayleigh fading, AWGN, bit LLRs,
LLR quantization.

SNR convention: per-terminal symbol SNR Es/N0 in dB with unit symbol energy,
so the complex noise variance is sigma^2 = 10^(-snr_db/10) (sigma^2/2 per
real dimension).  LLR sign convention: positive means bit 0 is more likely;
values are clamped to +-LLR_MAX.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gf2 import BinMatrix

LLR_MAX = 50.0


@dataclass(frozen=True)
class ChannelRealization:
    coeffs: np.ndarray  # (n_aps, u_terminals) complex
    noise_var: float

    def __post_init__(self):
        if self.noise_var <= 0:
            raise ValueError("noise variance must be positive")
        self.coeffs.setflags(write=False)


def snr_db_to_noise_var(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


def draw_channel(rng: np.random.Generator, n: int, u: int) -> np.ndarray:
    """i.i.d. unit-variance circularly-symmetric complex Gaussian (n, u)."""
    re = rng.standard_normal((n, u))
    im = rng.standard_normal((n, u))
    return (re + 1j * im) / np.sqrt(2.0)


def receive(h: np.ndarray, symbols: np.ndarray, noise_var: float, rng: np.random.Generator):
    """y_t = sum_l h[l] * symbols[t, l] + z_t with z ~ CN(0, noise_var)."""
    h = np.asarray(h)
    symbols = np.asarray(symbols)
    clean = symbols @ h if symbols.ndim == 2 else symbols * h
    if noise_var == 0:
        return clean
    z = rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)
    return clean + np.sqrt(noise_var / 2.0) * z


def joint_metrics(y: np.ndarray, sup: np.ndarray, noise_var: float) -> np.ndarray:
    """(T, N) hypothesis metrics -|y_t - sup[w]|^2 / noise_var."""
    y = np.atleast_1d(np.asarray(y))
    return -(np.abs(y[:, None] - sup[None, :]) ** 2) / noise_var


def bit_llrs(metrics: np.ndarray, masks0: np.ndarray, max_log: bool = False) -> np.ndarray:
    """Per-bit LLRs from joint hypothesis metrics.

    masks0[k] flags the hypotheses where bit k is 0.  Degenerate masks (a bit
    constant over all hypotheses) saturate at +-LLR_MAX.
    """
    T = metrics.shape[0]
    nbits = masks0.shape[0]
    out = np.empty((T, nbits))
    for k in range(nbits):
        m0 = masks0[k]
        if m0.all():
            out[:, k] = LLR_MAX
            continue
        if not m0.any():
            out[:, k] = -LLR_MAX
            continue
        if max_log:
            l0 = metrics[:, m0].max(axis=1)
            l1 = metrics[:, ~m0].max(axis=1)
        else:
            l0 = np.logaddexp.reduce(metrics[:, m0], axis=1)
            l1 = np.logaddexp.reduce(metrics[:, ~m0], axis=1)
        out[:, k] = l0 - l1
    return np.clip(out, -LLR_MAX, LLR_MAX)


def ncv_masks(g: BinMatrix) -> np.ndarray:
    """masks0[k][w] = True iff network-coded bit k of joint message w is 0."""
    w = np.arange(1 << g.cols)
    rows = np.array(g.row_words, dtype=np.int64)
    return ((np.bitwise_count(w[None, :] & rows[:, None]) & 1) == 0)


def terminal_bit_masks(m: int, u: int) -> np.ndarray:
    """masks0 for the mu per-terminal bits of the joint message (MT 0 first)."""
    mu = m * u
    w = np.arange(1 << mu)
    masks = np.empty((mu, w.size), dtype=bool)
    for k in range(mu):
        masks[k] = ((w >> (mu - 1 - k)) & 1) == 0
    return masks


def ncv_llr(
    y,
    h: np.ndarray,
    g: BinMatrix,
    sup: np.ndarray,
    noise_var: float,
    max_log: bool = False,
) -> np.ndarray:
    """LLRs of the network-coded bits g (x) w given observations y.

    ``sup`` is the per-hypothesis superposition table for channel h (passed
    in so per-frame callers build it once).
    """
    return bit_llrs(joint_metrics(y, sup, noise_var), ncv_masks(g), max_log)


# ---------------------------------------------------------------------------
# LLR quantization (the backhaul-limited CoMP baseline)
# ---------------------------------------------------------------------------


def quantize_llr(llrs: np.ndarray, bits: int, clip: float) -> np.ndarray:
    """Uniform midrise quantizer on [-clip, clip] with 2^bits levels."""
    if bits < 1:
        raise ValueError("quantizer needs at least 1 bit")
    if clip <= 0:
        raise ValueError("clip must be positive")
    levels = 1 << bits
    step = 2.0 * clip / levels
    idx = np.floor((np.asarray(llrs) + clip) / step).astype(np.int64)
    return np.clip(idx, 0, levels - 1)


def dequantize_llr(indices: np.ndarray, bits: int, clip: float) -> np.ndarray:
    levels = 1 << bits
    step = 2.0 * clip / levels
    return -clip + (np.asarray(indices) + 0.5) * step
