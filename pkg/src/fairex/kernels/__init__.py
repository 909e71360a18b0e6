"""Hot numeric kernels with selectable backend.

Set FAIREX_BACKEND=numpy to force the pure-numpy implementations, or
FAIREX_BACKEND=numba to require the compiled ones (raising if numba is not
importable). Unset, numba is used when available, numpy otherwise. Both
backends are integer-exact: identical inputs give identical outputs.
"""

from __future__ import annotations

import os

from ..core import ConfigError

_requested = os.environ.get("FAIREX_BACKEND", "").strip().lower()

if _requested not in ("", "numpy", "numba"):
    raise ConfigError(f"FAIREX_BACKEND must be 'numpy' or 'numba', got {_requested!r}")

if _requested == "numpy":
    from . import _numpy as _impl

    ACTIVE_BACKEND = "numpy"
elif _requested == "numba":
    from . import _numba as _impl  # raises ImportError when numba is absent

    ACTIVE_BACKEND = "numba"
else:
    try:
        from . import _numba as _impl

        ACTIVE_BACKEND = "numba"
    except ImportError:
        from . import _numpy as _impl

        ACTIVE_BACKEND = "numpy"

egress_chain = _impl.egress_chain
mc_min_add = _impl.mc_min_add


def backends_available() -> list[str]:
    out = ["numpy"]
    try:
        import numba  # noqa: F401

        out.append("numba")
    except ImportError:
        pass
    return out
