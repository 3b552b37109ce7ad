"""Select the integration kernel at import time.

The compiled ``_core`` extension is used when it imports cleanly; otherwise,
or when ``PDAVD_PURE_PYTHON=1`` is set, the pure-Python stepper is used.
Both expose ``dopri5_quadratic`` with identical arguments and results.
"""
from __future__ import annotations

import os

from . import _fallback

NAME = "python"
dopri5_quadratic = _fallback.dopri5_quadratic

if os.environ.get("PDAVD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core
    except ImportError:  # extension not built
        _core = None
    if _core is not None:
        NAME = "compiled"
        dopri5_quadratic = _core.dopri5_quadratic

dopri5 = _fallback.dopri5
