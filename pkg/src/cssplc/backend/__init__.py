"""Backend selection for the demodulation hot kernels.

The compiled extension is used when it imports cleanly; otherwise the numpy
fallback takes over.  Set CSSPLC_BACKEND=python or CSSPLC_BACKEND=cython to
force a choice (forcing cython raises if the extension is missing).  Both
backends produce identical decisions; energy values may differ in the last
few ulps because summation order differs.
"""

import os

from . import py_kernels

_requested = os.environ.get("CSSPLC_BACKEND", "auto").lower()

if _requested not in ("auto", "cython", "python"):
    raise RuntimeError(f"CSSPLC_BACKEND must be auto, cython or python, not {_requested!r}")

if _requested == "python":
    _impl = py_kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise RuntimeError("CSSPLC_BACKEND=cython but the compiled extension is not built")
        _impl = py_kernels
        BACKEND = "python"

dechirp_frames = _impl.dechirp_frames
superbin_energies_frames = _impl.superbin_energies_frames
argmax_frames = _impl.argmax_frames


def backend_name():
    """Name of the kernel implementation selected at import time."""
    return BACKEND


def get_backend(name):
    """Fetch a specific kernel module by name ('python' or 'cython')."""
    if name == "python":
        return py_kernels
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
