"""Kernel backend selection.

The heavy inner loops (beam-splitter bands, merge contraction, PDF
evaluation) exist twice: a compiled Cython extension and a NumPy/LAPACK
fallback with identical semantics.  The compiled module is preferred
when it imported successfully; set ``GAUSSIFY_BACKEND=numpy`` to force
the fallback or ``GAUSSIFY_BACKEND=compiled`` to fail loudly when the
extension is missing.
"""

import os

from . import _fallback

_choice = os.environ.get("GAUSSIFY_BACKEND", "auto").lower()

if _choice in ("auto", "compiled", "c"):
    try:
        from . import _core as _impl
    except ImportError:
        if _choice != "auto":
            raise ImportError(
                "GAUSSIFY_BACKEND=%s requested but the compiled kernels are "
                "not available; build the extension or unset the variable"
                % _choice
            )
        _impl = _fallback
elif _choice in ("numpy", "python", "fallback"):
    _impl = _fallback
else:
    raise ImportError("unknown GAUSSIFY_BACKEND value: %r" % _choice)

BACKEND = _impl.BACKEND
merge_fock = _impl.merge_fock
bs_block = _impl.bs_block
bs_band = _impl.bs_band
pdf_values = _impl.pdf_values

__all__ = ["BACKEND", "merge_fock", "bs_block", "bs_band", "pdf_values"]
