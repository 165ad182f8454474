"""Kernel backend selection: compiled extension with pure-NumPy fallback.

The compiled module is optional; set PNCSIM_PURE=1 to force the fallback.
Both backends share the enumeration structures in kernels_common, so results
are identical (asserted by the parity tests).
"""

from __future__ import annotations

import os

from . import _speedups_py

_impl = _speedups_py
if os.environ.get("PNCSIM_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _speedups as _compiled

        _impl = _compiled
    except ImportError:
        pass


def backend_name() -> str:
    return _impl.BACKEND_NAME


def backends() -> dict:
    """All importable backends, keyed by name (used by tests/benchmarks)."""
    found = {_speedups_py.BACKEND_NAME: _speedups_py}
    try:
        from . import _speedups as _compiled

        found[_compiled.BACKEND_NAME] = _compiled
    except ImportError:
        pass
    return found


def xor_min_dist2(points):
    return _impl.xor_min_dist2(points)


def sfs_delta_tables(points, tol):
    return _impl.sfs_delta_tables(points, tol)


def subspace_scan(rows_lifted, d_basis, delta_pos, coinc):
    return _impl.subspace_scan(rows_lifted, d_basis, delta_pos, coinc)


def viterbi_decode_pairs(llr_pairs):
    return _impl.viterbi_decode_pairs(llr_pairs)
