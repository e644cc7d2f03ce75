"""Hot numerical kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``tnsim.kernels._core``) is built at install time
when a C compiler is available; otherwise, or when ``TNSIM_PURE_PYTHON=1``
is set, the pure-numpy implementations from :mod:`tnsim.kernels.pure` are
used.  Both backends implement identical semantics (see ``pure.py``);
``BACKEND`` reports which one is active.
"""

import os

from . import pure

BACKEND = "pure"

if os.environ.get("TNSIM_PURE_PYTHON", "0") != "1":
    try:
        from . import _core  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _core = None  # type: ignore[assignment]
else:
    _core = None  # type: ignore[assignment]

if BACKEND == "compiled":
    apply_two_site = _core.apply_two_site
    truncated_svd_matrix = _core.truncated_svd_matrix
    qr_reduced = _core.qr_reduced
    rq_reduced = _core.rq_reduced
else:
    apply_two_site = pure.apply_two_site
    truncated_svd_matrix = pure.truncated_svd_matrix
    qr_reduced = pure.qr_reduced
    rq_reduced = pure.rq_reduced

__all__ = [
    "BACKEND",
    "apply_two_site",
    "truncated_svd_matrix",
    "qr_reduced",
    "rq_reduced",
    "pure",
]
