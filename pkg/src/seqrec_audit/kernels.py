"""Kernel backend selection.

The compiled Cython extension is used when it is importable; otherwise the
pure-Python twins run. Set ``SEQREC_AUDIT_PURE_PYTHON=1`` to force the
fallback. Both backends return identical results.
"""
import logging
import os

from . import _pykernels

_log = logging.getLogger(__name__)

_impl = _pykernels
BACKEND = "python"
if os.environ.get("SEQREC_AUDIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _log.debug("compiled kernels unavailable, using pure-Python fallback")

khop = _impl.khop
hop_distances = _impl.hop_distances
bpr_epoch = _impl.bpr_epoch

__all__ = ["BACKEND", "khop", "hop_distances", "bpr_epoch"]
