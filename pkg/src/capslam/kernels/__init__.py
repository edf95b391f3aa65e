"""Hot-kernel backend selection.

The compiled Cython extension is preferred; the numpy implementation is
the fallback when the extension is unavailable or when the environment
variable ``CAPSLAM_PURE_PYTHON`` is set to a non-empty value.
"""

import os

from . import _kernels_py

if os.environ.get("CAPSLAM_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

render_surfels = _impl.render_surfels
icp_system = _impl.icp_system
rgb_system = _impl.rgb_system
fuse_pixels = _impl.fuse_pixels

__all__ = [
    "BACKEND",
    "render_surfels",
    "icp_system",
    "rgb_system",
    "fuse_pixels",
]
