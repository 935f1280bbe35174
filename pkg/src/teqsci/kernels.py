"""Backend selection for the hot loops.

The compiled extension ``teqsci._kernels`` is used when it was built;
otherwise, or when ``TEQSCI_PURE_PYTHON=1`` is set, the numpy fallback in
``teqsci._kernels_py`` is used. Both expose ``rotate``, ``trotter``,
``apply_sum`` and ``assemble`` with identical signatures.
"""

import os

from . import _kernels_py

if os.environ.get("TEQSCI_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

backend = _compiled if _compiled is not None else _kernels_py
BACKEND_NAME = "cython" if _compiled is not None else "numpy"

rotate = backend.rotate
trotter = backend.trotter
apply_sum = backend.apply_sum
assemble = backend.assemble


def get_backend(name: str):
    """Return the kernel module named ``"cython"`` or ``"numpy"``."""
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            from . import _kernels  # raises ImportError when not built

            return _kernels
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
