"""Backend selection for the split-search kernels.

Prefers the compiled Cython extension; falls back to the pure-numpy
implementation when the extension was not built.  Set
``CHURNKIT_FORCE_PYTHON_KERNELS=1`` to force the fallback (used by the
benchmark and the backend-agreement tests).
"""

from __future__ import annotations

import os

if os.environ.get("CHURNKIT_FORCE_PYTHON_KERNELS"):
    from . import _split_py as _impl
else:
    try:
        from . import _split_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _split_py as _impl

BACKEND = _impl.BACKEND
best_logrank_split = _impl.best_logrank_split
best_poisson_split = _impl.best_poisson_split
