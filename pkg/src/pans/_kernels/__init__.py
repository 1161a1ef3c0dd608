"""Kernel backend selection.

The hot per-pixel kernels (cosine/linear scoring, fused loss+gradient) exist
twice: a Cython extension (``_core``) and a numpy fallback (``pykernels``).
The compiled backend is used when importable; set ``PANS_KERNELS=python`` or
``PANS_KERNELS=compiled`` to force one. Both compute the same quantities; the
reduction order differs, so results agree to float64 roundoff, not bitwise.
"""

import os

from . import pykernels

_choice = os.environ.get("PANS_KERNELS", "auto").lower()
if _choice not in ("auto", "python", "compiled"):
    raise ImportError(f"PANS_KERNELS must be auto, python or compiled, got {_choice!r}")

_impl = None
if _choice in ("auto", "compiled"):
    try:
        from . import _core as _impl
    except ImportError:
        if _choice == "compiled":
            raise ImportError("PANS_KERNELS=compiled but the extension is not built")
        _impl = None
if _impl is None:
    _impl = pykernels

BACKEND = "python" if _impl is pykernels else "compiled"

cosine_scores = _impl.cosine_scores
linear_scores = _impl.linear_scores
ce_loss_grad_cosine = _impl.ce_loss_grad_cosine
ce_loss_grad_linear = _impl.ce_loss_grad_linear


def available_backends():
    """Names of importable backends ("python" always; "compiled" if built)."""
    names = ["python"]
    try:
        from . import _core  # noqa: F401
        names.append("compiled")
    except ImportError:
        pass
    return names


def get_backend(name: str):
    """Return the kernel module for an explicit backend name."""
    if name == "python":
        return pykernels
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
