"""Convolution kernel backend selection.

The compiled Cython core is preferred when its extension module built;
otherwise the pure-numpy implementation is used.  Both share one
contract (NHWC float64, identical shapes), differ only in speed, and
agree numerically to BLAS rounding.  Set HAZNAV_KERNELS=python or
HAZNAV_KERNELS=cython to force a backend (forcing cython raises if the
extension is missing).
"""

import os

_forced = os.environ.get("HAZNAV_KERNELS", "").strip().lower()
if _forced not in ("", "cython", "python"):
    raise RuntimeError(f"HAZNAV_KERNELS must be 'cython' or 'python', not {_forced!r}")

_impl = None
if _forced in ("", "cython"):
    try:
        from . import _conv_cy as _impl
    except ImportError:
        if _forced == "cython":
            raise
if _impl is None:
    from . import _conv_np as _impl

BACKEND = _impl.BACKEND_NAME
conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
