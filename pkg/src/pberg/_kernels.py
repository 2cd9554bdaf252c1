"""Kernel dispatch: compiled core when importable, numpy fallback otherwise.

Set ``PBERG_PURE=1`` to force the fallback (used by the benchmark and by the
tests that compare both paths).
"""

import os

from . import _pycore

BACKEND = "python"

if os.environ.get("PBERG_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pycore
else:
    _impl = _pycore

neumaier_sum = _impl.neumaier_sum
ring_accumulate = _impl.ring_accumulate
monomial_design = _impl.monomial_design

__all__ = ["BACKEND", "neumaier_sum", "ring_accumulate", "monomial_design"]
