"""Hot numeric kernels with switchable backends.

The numba backend (direct jitted loops) is the default when numba imports
cleanly; set DEJAVU_BACKEND=numpy to force the pure-numpy im2col path, or
DEJAVU_BACKEND=numba to require the jitted one. `benchmarks/bench_kernels.py`
compares the two.

Exposed functions (NCHW, float32/float64):
    conv2d_forward(x, w, stride, pad)                 -> y
    conv2d_backward_input(gy, w, stride, pad, h, w)   -> gx
    conv2d_backward_weight(x, gy, stride, pad, kh, kw)-> gw
"""

import os

from . import numpy_impl

_BACKENDS = {"numpy": numpy_impl}

try:
    from . import numba_impl

    _BACKENDS["numba"] = numba_impl
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    numba_impl = None

_requested = os.environ.get("DEJAVU_BACKEND", "").strip().lower()
if _requested:
    if _requested not in _BACKENDS:
        raise RuntimeError(
            f"DEJAVU_BACKEND={_requested!r} not available; "
            f"choose one of {sorted(_BACKENDS)}"
        )
    _active = _requested
else:
    _active = "numba" if "numba" in _BACKENDS else "numpy"


def active_backend():
    return _active


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name):
    """Switch kernel backend at runtime (used by tests and benchmarks)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose one of {sorted(_BACKENDS)}")
    _active = name


def _mod():
    return _BACKENDS[_active]


def conv2d_forward(x, w, stride, pad):
    return _mod().conv2d_forward(x, w, stride, pad)


def conv2d_backward_input(gy, w, stride, pad, h, wdt):
    return _mod().conv2d_backward_input(gy, w, stride, pad, h, wdt)


def conv2d_backward_weight(x, gy, stride, pad, kh, kw):
    return _mod().conv2d_backward_weight(x, gy, stride, pad, kh, kw)
