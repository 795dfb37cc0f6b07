"""Backend selection for the sequence-sum kernel.

The compiled extension is used when it was built; otherwise the pure-Python
implementation is loaded. Set ``SWAPCALC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
chain_sums = _kernels_py.chain_sums

if os.environ.get("SWAPCALC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None
    if _ckernels is not None:
        chain_sums = _ckernels.chain_sums
        BACKEND = "cython"

__all__ = ["BACKEND", "chain_sums"]
