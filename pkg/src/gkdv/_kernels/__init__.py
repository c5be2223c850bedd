"""Hot-loop kernels: compiled extension when available, numpy fallback otherwise.

Set GKDV_PURE_PYTHON=1 to force the fallback (used by the benchmark).
"""

import os

if os.environ.get("GKDV_PURE_PYTHON"):
    from . import _stepper_py as kernels

    USING_COMPILED = False
else:
    try:
        from . import _stepper as kernels  # type: ignore[attr-defined]

        USING_COMPILED = True
    except ImportError:
        from . import _stepper_py as kernels

        USING_COMPILED = False

pow_int = kernels.pow_int
stage_ab = kernels.stage_ab
stage_c = kernels.stage_c
combine_final = kernels.combine_final
pad_spectrum = kernels.pad_spectrum

__all__ = [
    "USING_COMPILED",
    "pow_int",
    "stage_ab",
    "stage_c",
    "combine_final",
    "pad_spectrum",
]
