"""Versioned text format for candidate tables ("atlas" files).

Layout: a format line, a [meta] section of key = value pairs, one [sfs i]
block per retained fade state (value, witness, activity, clash partition,
ranked candidates in the "rows cols hexbits" matrix form), and a trailing
[checksum] section holding the SHA-256 of everything above it.  Writes are
atomic (temp file + rename).
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

from .gf2 import BinMatrix
from .search import CandidateTable, SfsEntry, make_candidate
from .sfs import SingularFadeState

FORMAT_LINE = "pncsim-atlas 1"

_META_INT = {
    "format_version", "sfs_total", "sfs_retained", "sfs_relaxed",
    "distinct_partitions", "distinct_matrices", "budget_bits",
    "prune_trials", "prune_seed", "cap", "u", "r",
}
_META_FLOAT = {"prune_delta", "tol"}
_META_OPTIONAL_INT = {"prune_keep"}


class AtlasFormatError(ValueError):
    """Raised for malformed or corrupted atlas files."""


def _fmt(x: float) -> str:
    return repr(float(x))


def atlas_text(table: CandidateTable) -> str:
    lines = [FORMAT_LINE, "[meta]"]
    meta = dict(table.meta)
    meta["modulation"] = table.modulation
    meta["u"] = table.u
    meta["r"] = table.r
    for k in sorted(meta):
        v = meta[k]
        lines.append(f"{k} = {'none' if v is None else v}")
    for i, e in enumerate(table.entries):
        st = e.state
        lines.append(f"[sfs {i}]")
        lines.append(f"value = {_fmt(st.value.real)} {_fmt(st.value.imag)}")
        lines.append("witness = " + " ".join(str(x) for x in st.witness))
        lines.append(f"activity = {_fmt(st.activity)}")
        lines.append(f"activity_ci = {_fmt(st.activity_ci[0])} {_fmt(st.activity_ci[1])}")
        lines.append(f"partition_key = {e.partition_key}")
        groups = ["|".join(",".join(str(x) for x in g) for g in st.partition)]
        lines.append("partition = " + groups[0])
        lines.append(f"candidates = {len(e.candidates)}")
        for cd in e.candidates:
            lines.append(
                f"C {cd.matrix.to_text()} dmin={_fmt(cd.dmin_at_sfs)} "
                f"sep={_fmt(cd.separation)} viol={cd.violations}"
            )
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    return body + f"[checksum]\nsha256 = {digest}\n"


def atlas_checksum(path) -> str:
    text = Path(path).read_text()
    body, _, _ = text.partition("[checksum]")
    return hashlib.sha256(body.encode()).hexdigest()


def save_atlas(table: CandidateTable, path) -> str:
    """Write atomically; returns the content checksum."""
    path = Path(path)
    text = atlas_text(table)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    body, _, _ = text.partition("[checksum]")
    return hashlib.sha256(body.encode()).hexdigest()


def load_atlas(path) -> CandidateTable:
    text = Path(path).read_text()
    body, sep, tail = text.partition("[checksum]")
    if not sep:
        raise AtlasFormatError(f"{path}: missing checksum section")
    stated = None
    for line in tail.strip().splitlines():
        k, _, v = line.partition("=")
        if k.strip() == "sha256":
            stated = v.strip()
    actual = hashlib.sha256(body.encode()).hexdigest()
    if stated != actual:
        raise AtlasFormatError(f"{path}: checksum mismatch (file corrupted?)")

    lines = body.splitlines()
    if not lines or lines[0].strip() != FORMAT_LINE:
        raise AtlasFormatError(f"{path}: not a pncsim atlas (bad format line)")
    meta: dict = {}
    entries: list[SfsEntry] = []
    cur: dict | None = None
    section = None
    for raw in lines[1:]:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("["):
            if cur is not None:
                entries.append(_entry_from(cur))
                cur = None
            if line == "[meta]":
                section = "meta"
            elif line.startswith("[sfs "):
                section = "sfs"
                cur = {"cands": []}
            else:
                raise AtlasFormatError(f"{path}: unknown section {line}")
            continue
        if section == "meta":
            k, _, v = line.partition("=")
            meta[k.strip()] = _parse_meta(k.strip(), v.strip())
        elif section == "sfs":
            if line.startswith("C "):
                cur["cands"].append(line[2:])
            else:
                k, _, v = line.partition("=")
                cur[k.strip()] = v.strip()
        else:
            raise AtlasFormatError(f"{path}: content outside any section")
    if cur is not None:
        entries.append(_entry_from(cur))

    for key in ("modulation", "u", "r"):
        if key not in meta:
            raise AtlasFormatError(f"{path}: meta is missing {key!r}")
    modulation = meta.pop("modulation")
    u = meta.pop("u")
    r = meta.pop("r")
    return CandidateTable(modulation, u, r, entries, meta)


def _parse_meta(k: str, v: str):
    if v == "none":
        return None
    if k in _META_INT or k in _META_OPTIONAL_INT:
        return int(v)
    if k in _META_FLOAT:
        return float(v)
    return v


def _entry_from(cur: dict) -> SfsEntry:
    try:
        re_, im_ = (float(x) for x in cur["value"].split())
        witness = tuple(int(x) for x in cur["witness"].split())
        activity = float(cur["activity"])
        ci = tuple(float(x) for x in cur["activity_ci"].split())
        partition = tuple(
            tuple(int(x) for x in g.split(",")) for g in cur["partition"].split("|")
        )
        n_cands = int(cur["candidates"])
        cands = []
        for spec in cur["cands"]:
            mat_text, *fields = spec.rsplit(" ", 3)
            kv = dict(f.split("=", 1) for f in fields)
            cands.append(
                make_candidate(
                    BinMatrix.from_text(mat_text),
                    float(kv["dmin"]),
                    float(kv["sep"]),
                    int(kv["viol"]),
                )
            )
    except (KeyError, ValueError) as exc:
        raise AtlasFormatError(f"malformed fade-state block: {exc}") from exc
    if len(cands) != n_cands:
        raise AtlasFormatError(
            f"fade-state block declares {n_cands} candidates but lists {len(cands)}"
        )
    state = SingularFadeState(
        complex(re_, im_), witness, partition, activity, (ci[0], ci[1])
    )
    return SfsEntry(state, tuple(cands), cur["partition_key"])
