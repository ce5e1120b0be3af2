"""SGD kernel backend selection.

The compiled Cython kernel is used when the extension was built; otherwise the
pure-Python mirror takes over.  Set ``PEERLEARN_PURE_PYTHON=1`` to force the
fallback (used by the benchmark and the cross-backend tests).
"""

import os

if os.environ.get("PEERLEARN_PURE_PYTHON"):
    from .sgd_py import batch_loss, run_epoch
    BACKEND = "python"
else:
    try:
        from ._sgd import batch_loss, run_epoch
        BACKEND = "cython"
    except ImportError:
        from .sgd_py import batch_loss, run_epoch
        BACKEND = "python"

__all__ = ["run_epoch", "batch_loss", "BACKEND"]
