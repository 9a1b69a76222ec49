"""Select the row-reduction kernel: compiled extension if built, else pure Python."""

from __future__ import annotations

from . import _echelon_py

try:  # compiled fraction-free kernel (optional)
    from . import _echelon as _ext  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on the build environment
    _ext = None

COMPILED = _ext is not None
rref_rows = _ext.rref_rows if COMPILED else _echelon_py.rref_rows
rref_rows_py = _echelon_py.rref_rows
