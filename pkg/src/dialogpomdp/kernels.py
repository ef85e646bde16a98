"""Kernel backend selection.

The compiled extension is used when it imports; set ``DIALOGPOMDP_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _pykernels

if os.environ.get("DIALOGPOMDP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

pointwise_dominated = _impl.pointwise_dominated
witness_lp = _impl.witness_lp
backup_terms = _impl.backup_terms
lookahead_terms = _impl.lookahead_terms
project = _pykernels.project
