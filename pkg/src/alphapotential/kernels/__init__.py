"""Hot-kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise the
numpy reference implementation is used.  Set ALPHAPOTENTIAL_PURE_PYTHON=1 to
force the fallback (useful for parity debugging and benchmarking).
"""

import os

from . import reference

if os.environ.get("ALPHAPOTENTIAL_PURE_PYTHON", "0") == "1":
    _impl = reference
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = reference
        BACKEND = "python"

sim_linear_state = _impl.sim_linear_state
sim_lifted = _impl.sim_lifted
sim_f = _impl.sim_f
sim_sensitivity_decoupled = _impl.sim_sensitivity_decoupled

__all__ = [
    "BACKEND",
    "reference",
    "sim_linear_state",
    "sim_lifted",
    "sim_f",
    "sim_sensitivity_decoupled",
]
