"""Monte-Carlo outage experiments.

One trial = one quasi-static fading frame: draw the channel, encode each
terminal's info bits, modulate, superimpose at every access point, run the
scheme-specific receiver chain, and flag an outage when any terminal's info
frame is not recovered error-free.  All schemes at a given (SNR point, trial
index) share the same channel / data / noise realization (the generator is
re-seeded per scheme from the (point, trial) key), so scheme comparisons are
paired and results are independent of worker count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .baselines import (
    SCHEME_IDS,
    backhaul_load,
    ideal_comp_llrs,
    nonideal_comp_llrs,
)
from .coding import coded_length, conv_decode, conv_encode
from .modem import Constellation, constellation_by_name, superposition_table
from .phy import (
    LLR_MAX,
    bit_llrs,
    draw_channel,
    joint_metrics,
    ncv_masks,
    snr_db_to_noise_var,
)
from .search import CandidateTable, online_select
from .util import wilson_ci


class ConfigError(ValueError):
    """Invalid or inconsistent simulation configuration."""


@dataclass(frozen=True)
class EarlyStop:
    """Optional per-point stopping: run until the Wilson CI is narrower than
    20% of the estimate (checked at batch boundaries), capped at
    max(frames, 100/target_p) trials."""

    target_p: float
    batch: int = 100


@dataclass(frozen=True)
class SimConfig:
    u: int = 2
    n: int = 2
    modulation: str = "qam4"
    schemes: tuple[str, ...] = SCHEME_IDS
    snr_db: tuple[float, ...] = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0)
    frames: int = 1000
    info_bits: int = 120
    seed: int = 1
    atlas_path: Optional[str] = None
    coding: bool = True
    quant_clip: float = 8.0
    max_log: bool = False
    workers: int = 1
    early_stop: Optional[EarlyStop] = None

    def validate(self, table: Optional[CandidateTable]) -> None:
        if self.u < 2 or self.n < 1:
            raise ConfigError(f"need u >= 2 terminals and n >= 1 APs, got u={self.u} n={self.n}")
        if not self.schemes:
            raise ConfigError("no schemes selected")
        for s in self.schemes:
            if s not in SCHEME_IDS:
                raise ConfigError(f"unknown scheme {s!r}; expected one of {SCHEME_IDS}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("duplicate scheme in list")
        if list(self.snr_db) != sorted(set(self.snr_db)):
            raise ConfigError("SNR grid must be strictly increasing")
        if self.frames < 1:
            raise ConfigError("frames must be >= 1")
        if self.info_bits < 2 or self.info_bits % 2:
            raise ConfigError("info_bits must be even and >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        c = constellation_by_name(self.modulation)
        mu = c.m * self.u
        if mu % self.n:
            raise ConfigError(
                f"joint message width {mu} not divisible by {self.n} APs; "
                "row allocation would be uneven across frames"
            )
        if "bmas" in self.schemes:
            if table is None:
                raise ConfigError("scheme 'bmas' needs an atlas (atlas_path)")
            r_need = c.m if self.u > 2 else mu // self.n
            if table.modulation != self.modulation or table.u != 2 or table.r != r_need:
                raise ConfigError(
                    f"atlas header (modulation={table.modulation}, u={table.u}, r={table.r}) "
                    f"does not match scenario (modulation={self.modulation}, pair tables with "
                    f"r={r_need} required)"
                )


@dataclass(frozen=True)
class TrialOutcome:
    outage: bool
    degraded: bool = False


@dataclass(frozen=True)
class OutageResult:
    scheme: str
    snr_db: float
    p_out: float
    ci_lo: float
    ci_hi: float
    frames: int
    backhaul_bits: float
    degraded_count: int


@dataclass
class RunContext:
    """Preloaded per-process state shared by all trials."""

    cfg: SimConfig
    constellation: Constellation
    table: Optional[CandidateTable]
    frame: "FrameLayout"


@dataclass(frozen=True)
class FrameLayout:
    info_bits: int
    coded_bits: int  # per terminal, before padding
    symbols: int
    pad: int


def frame_layout(cfg: SimConfig, c: Constellation) -> FrameLayout:
    coded = coded_length(cfg.info_bits) if cfg.coding else cfg.info_bits
    symbols = -(-coded // c.m)
    return FrameLayout(cfg.info_bits, coded, symbols, symbols * c.m - coded)


def make_context(cfg: SimConfig, table: Optional[CandidateTable] = None) -> RunContext:
    if table is None and cfg.atlas_path:
        from .atlas_io import load_atlas

        table = load_atlas(cfg.atlas_path)
    cfg.validate(table)
    c = constellation_by_name(cfg.modulation)
    return RunContext(cfg, c, table, frame_layout(cfg, c))


def trial_rng(seed: int, snr_idx: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(snr_idx, trial)))


def _encode_frames(ctx: RunContext, info: np.ndarray) -> np.ndarray:
    """(u, symbols) per-terminal symbol label indices."""
    cfg, c = ctx.cfg, ctx.constellation
    fl = ctx.frame
    u = cfg.u
    coded = np.zeros((u, fl.symbols * c.m), dtype=np.uint8)
    for l in range(u):
        coded[l, : fl.coded_bits] = conv_encode(info[l]) if cfg.coding else info[l]
    weights = 1 << np.arange(c.m - 1, -1, -1)
    return (coded.reshape(u, fl.symbols, c.m) * weights).sum(axis=2)


def _joint_indices(labels: np.ndarray, m: int) -> np.ndarray:
    """Per-symbol joint message indices from (u, T) per-terminal labels."""
    u, T = labels.shape
    w = np.zeros(T, dtype=np.int64)
    for l in range(u):
        w = (w << m) | labels[l]
    return w


def run_trial(
    ctx: RunContext, scheme: str, snr_db: float, rng: np.random.Generator
) -> TrialOutcome:
    """One frame of one scheme. The rng must be freshly seeded per
    (point, trial) so every scheme sees the same realization."""
    cfg, c = ctx.cfg, ctx.constellation
    fl = ctx.frame
    u, n = cfg.u, cfg.n
    noise_var = snr_db_to_noise_var(snr_db)

    H = draw_channel(rng, n, u)
    info = rng.integers(0, 2, size=(u, fl.info_bits)).astype(np.uint8)
    labels = _encode_frames(ctx, info)
    tx = c.points[labels]  # (u, T)
    noise = (
        rng.standard_normal((n, fl.symbols)) + 1j * rng.standard_normal((n, fl.symbols))
    ) * np.sqrt(noise_var / 2.0)
    ys = tx.T @ H.T + 0.0
    ys = ys.T + noise  # (n, T): y_j = sum_l h_jl s_l + z_j

    if scheme == "bmas":
        return _bmas_receiver(ctx, H, ys, info, noise_var)
    if scheme == "comp-ideal":
        llrs = ideal_comp_llrs(ys, H, c, noise_var, cfg.max_log)
    elif scheme == "comp-quant2":
        llrs = nonideal_comp_llrs(ys, H, c, noise_var, 2, cfg.quant_clip, cfg.max_log)
    elif scheme == "comp-quant4":
        llrs = nonideal_comp_llrs(ys, H, c, noise_var, 4, cfg.quant_clip, cfg.max_log)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    ok = _decode_terminals_from_llrs(ctx, llrs, info)
    return TrialOutcome(outage=not ok)


def _llr_stream(llrs: np.ndarray, l: int, m: int, fl: FrameLayout) -> np.ndarray:
    """Coded-bit LLR stream of terminal l from (T, m*u) joint-bit LLRs."""
    per_symbol = llrs[:, l * m : (l + 1) * m]
    flat = per_symbol.reshape(-1)
    return flat[: fl.coded_bits]


def _decode_terminals_from_llrs(ctx: RunContext, llrs: np.ndarray, info: np.ndarray) -> bool:
    cfg, c = ctx.cfg, ctx.constellation
    for l in range(cfg.u):
        stream = _llr_stream(llrs, l, c.m, ctx.frame)
        if cfg.coding:
            dec = conv_decode(stream, cfg.info_bits)
        else:
            dec = (stream < 0).astype(np.uint8)
        if not np.array_equal(dec, info[l]):
            return False
    return True


def _bmas_receiver(
    ctx: RunContext, H: np.ndarray, ys: np.ndarray, info: np.ndarray, noise_var: float
) -> TrialOutcome:
    cfg, c = ctx.cfg, ctx.constellation
    fl = ctx.frame
    assignment = online_select(ctx.table, H)

    # access points: per-symbol hard decisions on the network-coded bits
    ncv_bits = []
    for j in range(cfg.n):
        sup = superposition_table(c, H[j], cfg.u)
        metrics = joint_metrics(ys[j], sup, noise_var)
        llr = bit_llrs(metrics, ncv_masks(assignment.per_ap[j].matrix), cfg.max_log)
        ncv_bits.append((llr < 0).astype(np.int64))  # (T, r_j)

    # central unit: stack, invert the global mapping per symbol
    x = np.concatenate(ncv_bits, axis=1)  # (T, mu)
    mu = x.shape[1]
    weights = 1 << np.arange(mu - 1, -1, -1, dtype=np.int64)
    x_words = x @ weights
    inv_rows = np.array(assignment.global_inv.row_words, dtype=np.int64)
    w_bits = (np.bitwise_count(x_words[:, None] & inv_rows[None, :]) & 1).astype(np.uint8)
    # w_bits[:, k] is joint-message bit k; terminal l owns bits [l*m, (l+1)*m)
    ok = True
    for l in range(cfg.u):
        coded = w_bits[:, l * c.m : (l + 1) * c.m].reshape(-1)[: fl.coded_bits]
        if cfg.coding:
            dec = conv_decode(np.where(coded == 0, LLR_MAX, -LLR_MAX) / LLR_MAX, cfg.info_bits)
        else:
            dec = coded
        if not np.array_equal(dec, info[l]):
            ok = False
            break
    return TrialOutcome(outage=not ok, degraded=assignment.degraded)


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------

_WORKER_CTX: Optional[RunContext] = None


def _worker_init(cfg: SimConfig):
    global _WORKER_CTX
    _WORKER_CTX = make_context(cfg)


def _run_chunk_in_worker(args):
    snr_idx, lo, hi = args
    return _run_chunk(_WORKER_CTX, snr_idx, lo, hi)


def _run_chunk(ctx: RunContext, snr_idx: int, lo: int, hi: int):
    cfg = ctx.cfg
    snr = cfg.snr_db[snr_idx]
    out = {s: np.zeros(hi - lo, dtype=np.uint8) for s in cfg.schemes}
    deg = {s: np.zeros(hi - lo, dtype=np.uint8) for s in cfg.schemes}
    for t in range(lo, hi):
        for s in cfg.schemes:
            r = run_trial(ctx, s, snr, trial_rng(cfg.seed, snr_idx, t))
            out[s][t - lo] = r.outage
            deg[s][t - lo] = r.degraded
    return snr_idx, lo, out, deg


def _stop_point(outcomes: np.ndarray, es: EarlyStop, frames_min: int, frames_cap: int) -> int:
    """Deterministic early-stop boundary from the trial-index-ordered outcomes."""
    n_avail = outcomes.shape[1]
    for boundary in range(es.batch, n_avail + 1, es.batch):
        if boundary < frames_min:
            continue
        done = True
        for row in outcomes:
            k = int(row[:boundary].sum())
            p = k / boundary
            if p == 0.0:
                done = False
                break
            lo, hi = wilson_ci(k, boundary)
            if (hi - lo) >= 0.2 * p:
                done = False
                break
        if done:
            return boundary
    return min(frames_cap, n_avail)


def estimate_outage(cfg: SimConfig, table: Optional[CandidateTable] = None) -> list[OutageResult]:
    ctx = make_context(cfg, table)
    if cfg.workers > 1 and "bmas" in cfg.schemes and not cfg.atlas_path:
        raise ConfigError("parallel bmas runs need atlas_path (workers reload the atlas)")
    frames_cap = cfg.frames
    if cfg.early_stop is not None:
        frames_cap = max(cfg.frames, int(np.ceil(100.0 / cfg.early_stop.target_p)))

    results: list[OutageResult] = []
    chunk = 250
    pool = None
    try:
        if cfg.workers > 1:
            import concurrent.futures as cf

            pool = cf.ProcessPoolExecutor(
                max_workers=cfg.workers, initializer=_worker_init, initargs=(cfg,)
            )
        for snr_idx in range(len(cfg.snr_db)):
            outages = {s: np.zeros(frames_cap, dtype=np.uint8) for s in cfg.schemes}
            degraded = {s: np.zeros(frames_cap, dtype=np.uint8) for s in cfg.schemes}
            done = 0
            while done < frames_cap:
                step = min(chunk * max(1, cfg.workers), frames_cap - done)
                tasks = [
                    (snr_idx, lo, min(lo + chunk, done + step))
                    for lo in range(done, done + step, chunk)
                ]
                if pool is not None:
                    parts = list(pool.map(_run_chunk_in_worker, tasks))
                else:
                    parts = [_run_chunk(ctx, *t) for t in tasks]
                for _, lo, out, deg in parts:
                    for s in cfg.schemes:
                        outages[s][lo : lo + out[s].size] = out[s]
                        degraded[s][lo : lo + deg[s].size] = deg[s]
                done += step
                if cfg.early_stop is not None and done >= cfg.frames:
                    rows = np.stack([outages[s][:done] for s in cfg.schemes])
                    if _stop_point(rows, cfg.early_stop, cfg.frames, frames_cap) <= done:
                        break
            rows = np.stack([outages[s][:done] for s in cfg.schemes])
            used = (
                _stop_point(rows, cfg.early_stop, cfg.frames, frames_cap)
                if cfg.early_stop is not None
                else min(cfg.frames, done)
            )
            for s in cfg.schemes:
                k = int(outages[s][:used].sum())
                lo_ci, hi_ci = wilson_ci(k, used)
                budget = backhaul_load(s, cfg.u, cfg.n, ctx.constellation.m)
                results.append(
                    OutageResult(
                        s,
                        cfg.snr_db[snr_idx],
                        k / used,
                        lo_ci,
                        hi_ci,
                        used,
                        budget.total_bits,
                        int(degraded[s][:used].sum()),
                    )
                )
    finally:
        if pool is not None:
            pool.shutdown()
    return results


# ---------------------------------------------------------------------------
# result emission
# ---------------------------------------------------------------------------

CSV_HEADER = "scheme,snr_db,p_out,ci_lo,ci_hi,frames,backhaul_bits,degraded_count"


def results_to_csv(results: list[OutageResult]) -> str:
    lines = [CSV_HEADER]
    for r in results:
        lines.append(
            f"{r.scheme},{r.snr_db!r},{r.p_out!r},{r.ci_lo!r},{r.ci_hi!r},"
            f"{r.frames},{r.backhaul_bits!r},{r.degraded_count}"
        )
    return "\n".join(lines) + "\n"


def parse_results_csv(text: str) -> list[OutageResult]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unrecognized results CSV header")
    out = []
    for ln in lines[1:]:
        f = ln.split(",")
        out.append(
            OutageResult(
                f[0], float(f[1]), float(f[2]), float(f[3]), float(f[4]),
                int(f[5]), float(f[6]), int(f[7]),
            )
        )
    return out


def emit_results(
    results: list[OutageResult],
    outdir,
    cfg: SimConfig,
    atlas_checksum: Optional[str] = None,
) -> tuple[Path, Path]:
    """Write results.csv and a reproduction manifest atomically."""
    if not results:
        raise ValueError("refusing to emit an empty result set")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "results.csv"
    manifest_path = outdir / "manifest.json"
    _atomic_write(csv_path, results_to_csv(results))
    cfg_dict = {
        k: (list(v) if isinstance(v, tuple) else v)
        for k, v in vars(cfg).items()
        if k != "early_stop"
    }
    cfg_dict["early_stop"] = None if cfg.early_stop is None else vars(cfg.early_stop)
    manifest = {
        "config": cfg_dict,
        "seed": cfg.seed,
        "package_version": __version__,
        "atlas_sha256": atlas_checksum,
        "results_csv": csv_path.name,
    }
    _atomic_write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return csv_path, manifest_path


def _atomic_write(path: Path, text: str):
    import os
    import tempfile

    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
