"""Select the compiled kernels when available, else the numpy fallback.

Set ``BACKHAUL_MG_PURE=1`` to force the fallback.
"""

import os

from . import _kernels_py

compiled = None
if os.environ.get("BACKHAUL_MG_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:  # pragma: no cover - depends on the build
        compiled = None

kernels = compiled if compiled is not None else _kernels_py
BACKEND = "compiled" if compiled is not None else "python"
