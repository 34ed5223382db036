"""Numerical kernel backend selection.

The compiled extension (``_fast``, Cython) is preferred; the pure NumPy
module (``_ref``) is the fallback. GEOPRIV_BACKEND=python forces the
fallback, GEOPRIV_BACKEND=c requires the extension.
"""

import os

_requested = os.environ.get("GEOPRIV_BACKEND", "").strip().lower()

if _requested in ("python", "ref", "pure"):
    from geopriv._kernels import _ref as _impl

    BACKEND = "python"
elif _requested in ("c", "fast", "compiled"):
    from geopriv._kernels import _fast as _impl  # type: ignore[no-redef]

    BACKEND = "c"
elif _requested == "":
    try:
        from geopriv._kernels import _fast as _impl  # type: ignore[no-redef]

        BACKEND = "c"
    except ImportError:
        from geopriv._kernels import _ref as _impl

        BACKEND = "python"
else:
    raise RuntimeError(f"GEOPRIV_BACKEND must be 'c' or 'python', got {_requested!r}")

INV_E = _impl.INV_E
LOG_UNDERFLOW = _impl.LOG_UNDERFLOW
lambert_wm1 = _impl.lambert_wm1
lambert_wm1_array = _impl.lambert_wm1_array
laplace_radii = _impl.laplace_radii
weiszfeld = _impl.weiszfeld
remap_batch = _impl.remap_batch

__all__ = [
    "BACKEND",
    "INV_E",
    "LOG_UNDERFLOW",
    "lambert_wm1",
    "lambert_wm1_array",
    "laplace_radii",
    "weiszfeld",
    "remap_batch",
]
