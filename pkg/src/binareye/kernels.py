"""Hot-loop kernel selection.

The compiled extension is used when it imports; set ``BINAREYE_PURE=1`` to
force the numpy fallback.
"""

import os

from binareye import _pykernels

BACKEND = "python"
if os.environ.get("BINAREYE_PURE", "") not in ("1", "true", "yes"):
    try:
        from binareye import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

conv_partials = _impl.conv_partials
fc_scores = _impl.fc_scores
