"""Hot-path scan kernels with a compiled core and a pure-python fallback.

The scheduler's bitmap scans run once per request per UL slot and dominate
long property-test and simulation runs.  ``CFLAB_PURE_PYTHON=1`` forces the
fallback (used by the benchmark to compare both).
"""

import os

from . import _pure

if os.environ.get("CFLAB_PURE_PYTHON") == "1":
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

find_zero_run = _impl.find_zero_run
find_single_owner_run = _impl.find_single_owner_run

__all__ = ["find_zero_run", "find_single_owner_run", "BACKEND"]
