"""Hot kernels: BM25 accumulation, temporal window masks, synonymy pair extraction.

The compiled extension is used when it was built; otherwise (or when
``REMEM_PURE_PYTHON=1``) the numpy fallback is selected at import.
"""

from __future__ import annotations

import os

from . import _pykernels as py

MODE_NONE = py.MODE_NONE
MODE_INCLUSIVE = py.MODE_INCLUSIVE
MODE_STRICT = py.MODE_STRICT
MODE_EQ = py.MODE_EQ

compiled = None
if os.environ.get("REMEM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled  # type: ignore[no-redef]
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else py
BACKEND = "cython" if compiled is not None else "python"

bm25_scores = _impl.bm25_scores
window_mask = _impl.window_mask
threshold_pairs = _impl.threshold_pairs

__all__ = [
    "BACKEND",
    "MODE_EQ",
    "MODE_INCLUSIVE",
    "MODE_NONE",
    "MODE_STRICT",
    "bm25_scores",
    "compiled",
    "py",
    "threshold_pairs",
    "window_mask",
]
