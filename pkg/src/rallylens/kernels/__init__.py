"""Kernel backend selection.

The compiled extension is preferred when present; the pure-numpy fallback
is always available. Set RALLYLENS_KERNELS=numpy (or =native) to force a
backend, e.g. for benchmarking one against the other.
"""

import os

from . import _numpy

_requested = os.environ.get("RALLYLENS_KERNELS", "").lower()

if _requested == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "RALLYLENS_KERNELS=native but the compiled extension is not "
                "built; install with `pip install -e . --no-build-isolation`"
            ) from None
        _impl = _numpy
        BACKEND = "numpy"

conv1d_same_forward = _impl.conv1d_same_forward
conv1d_same_backward = _impl.conv1d_same_backward
gru_scan_forward = _impl.gru_scan_forward
gru_scan_backward = _impl.gru_scan_backward
adam_update = _impl.adam_update

__all__ = [
    "BACKEND",
    "conv1d_same_forward",
    "conv1d_same_backward",
    "gru_scan_forward",
    "gru_scan_backward",
    "adam_update",
]
