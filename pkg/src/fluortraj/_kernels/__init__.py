"""Hot-loop stepping kernels with a compiled core and a pure fallback.

The Cython extension ``fluortraj._kernels._compiled`` is used when it
imported successfully; otherwise the numpy implementation in ``pure`` is
selected.  Both perform identical arithmetic in identical order, so the
engines are interchangeable bit for bit (covered by the test suite).

Set ``FLUORTRAJ_KERNELS=pure`` or ``=compiled`` to force an engine;
``auto`` (default) prefers the compiled core.
"""

import os

from .pure import pack_constants

_choice = os.environ.get("FLUORTRAJ_KERNELS", "auto")
if _choice not in ("auto", "compiled", "pure"):
    raise ValueError(f"FLUORTRAJ_KERNELS must be auto|compiled|pure, got {_choice!r}")

ENGINE = "pure"
if _choice in ("auto", "compiled"):
    try:
        from . import _compiled as _impl

        ENGINE = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from . import pure as _impl
else:
    from . import pure as _impl

rotate = _impl.rotate
step_photodetect = _impl.step_photodetect
step_homodyne = _impl.step_homodyne
step_heterodyne = _impl.step_heterodyne

__all__ = [
    "ENGINE",
    "pack_constants",
    "rotate",
    "step_photodetect",
    "step_homodyne",
    "step_heterodyne",
]
