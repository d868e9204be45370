"""Kernel selection for the banded factorization.

The compiled Cython extension is used when it was built; otherwise, or
when ``WAVEGUIDE_PML_PURE_PYTHON=1`` is set before import, the NumPy
implementation takes over.  ``IMPLEMENTATION`` names the active one.
"""

import os

if os.environ.get("WAVEGUIDE_PML_PURE_PYTHON", "") == "1":
    from ._banded_py import ldlt_factor, ldlt_solve

    IMPLEMENTATION = "python"
else:
    try:
        from ._banded import ldlt_factor, ldlt_solve

        IMPLEMENTATION = "compiled"
    except ImportError:  # extension not built
        from ._banded_py import ldlt_factor, ldlt_solve

        IMPLEMENTATION = "python"

__all__ = ["IMPLEMENTATION", "ldlt_factor", "ldlt_solve"]
