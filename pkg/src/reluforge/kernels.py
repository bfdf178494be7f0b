"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy fallback.
Setting ``RELUFORGE_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _dp_py

BACKENDS = {"python": _dp_py.segmented_dp}
SIMPLIFIERS = {"python": _dp_py.simplify_nodes}
try:
    from . import _dp  # type: ignore[attr-defined]
except ImportError:
    pass
else:
    BACKENDS["cython"] = _dp.segmented_dp
    SIMPLIFIERS["cython"] = _dp.simplify_nodes

if os.environ.get("RELUFORGE_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    BACKEND = "python"
else:
    BACKEND = "cython" if "cython" in BACKENDS else "python"
segmented_dp = BACKENDS[BACKEND]
simplify_nodes = SIMPLIFIERS[BACKEND]

__all__ = ["BACKEND", "BACKENDS", "SIMPLIFIERS", "segmented_dp", "simplify_nodes"]
