"""Hot kernels with a compiled backend when available.

``JFCS_PURE_PYTHON=1`` forces the pure-Python implementation.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("JFCS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

waterfill_total = _impl.waterfill_total
waterfill_power = _impl.waterfill_power
waterfill_bisect = _impl.waterfill_bisect
project_capped_simplex = _impl.project_capped_simplex
project_groups = _impl.project_groups
project_groups_ball = _impl.project_groups_ball
penalised_objective = _impl.penalised_objective
pg_ascent = _impl.pg_ascent
surrogate_terms = _pykernels.surrogate_terms

__all__ = ["BACKEND", "waterfill_total", "waterfill_power", "waterfill_bisect",
           "project_capped_simplex", "project_groups", "project_groups_ball", "penalised_objective",
           "pg_ascent", "surrogate_terms"]
