"""Coordinated-multipoint reference receivers and backhaul accounting.

Ideal CoMP: unconstrained backhaul, joint ML over all access points'
observations, per-terminal bit LLRs marginalized from the joint posterior.

Non-ideal CoMP: each access point runs its own multiuser bit-LLR demapper,
quantizes every LLR to b bits (uniform midrise, clipped), and forwards the
indices; the central unit dequantizes and sums LLRs across access points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modem import Constellation, superposition_table
from .phy import (
    bit_llrs,
    dequantize_llr,
    joint_metrics,
    quantize_llr,
    terminal_bit_masks,
)

SCHEME_IDS = ("bmas", "comp-ideal", "comp-quant2", "comp-quant4")


@dataclass(frozen=True)
class BackhaulBudget:
    scheme: str
    per_ap_bits: tuple[float, ...]
    total_bits: float
    unlimited: bool = False


def backhaul_load(scheme: str, u: int, n: int, m: int, mu_rows: tuple[int, ...] | None = None) -> BackhaulBudget:
    """Backhaul bits per channel use carried from the APs to the CPU."""
    mu = m * u
    if scheme == "bmas":
        rows = mu_rows if mu_rows is not None else _even_rows(mu, n)
        return BackhaulBudget(scheme, tuple(float(r) for r in rows), float(mu))
    if scheme == "comp-ideal":
        return BackhaulBudget(scheme, (float("inf"),) * n, float("inf"), unlimited=True)
    if scheme in ("comp-quant2", "comp-quant4"):
        b = 2 if scheme == "comp-quant2" else 4
        per = float(u * m * b)
        return BackhaulBudget(scheme, (per,) * n, per * n)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEME_IDS}")


def _even_rows(mu: int, n: int) -> tuple[int, ...]:
    base, rem = divmod(mu, n)
    return tuple(base + (1 if j < rem else 0) for j in range(n))


def ideal_comp_llrs(
    ys: np.ndarray,
    channel: np.ndarray,
    c: Constellation,
    noise_var: float,
    max_log: bool = False,
) -> np.ndarray:
    """(T, m*u) per-terminal bit LLRs from the joint all-AP ML metric."""
    n, u = channel.shape
    metrics = None
    for j in range(n):
        mj = joint_metrics(ys[j], superposition_table(c, channel[j], u), noise_var)
        metrics = mj if metrics is None else metrics + mj
    return bit_llrs(metrics, terminal_bit_masks(c.m, u), max_log)


def single_ap_llrs(
    y: np.ndarray,
    h: np.ndarray,
    c: Constellation,
    noise_var: float,
    max_log: bool = False,
) -> np.ndarray:
    """(T, m*u) per-terminal bit LLRs from one access point's observation."""
    u = h.size
    metrics = joint_metrics(y, superposition_table(c, h, u), noise_var)
    return bit_llrs(metrics, terminal_bit_masks(c.m, u), max_log)


def nonideal_comp_llrs(
    ys: np.ndarray,
    channel: np.ndarray,
    c: Constellation,
    noise_var: float,
    bits: int | None,
    clip: float = 8.0,
    max_log: bool = False,
) -> np.ndarray:
    """Combined (summed) dequantized per-AP bit LLRs; bits=None bypasses the
    quantizer (the unlimited-resolution limit of the same combining rule)."""
    n, _ = channel.shape
    combined = None
    for j in range(n):
        llr = single_ap_llrs(ys[j], channel[j], c, noise_var, max_log)
        if bits is not None:
            llr = dequantize_llr(quantize_llr(llr, bits, clip), bits, clip)
        combined = llr if combined is None else combined + llr
    return combined
