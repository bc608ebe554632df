"""Kernel backend selection: compiled extension when built, pure fallback.

Set SIGNEVAL_PURE=1 to force the pure backend (used by tests and the
benchmark to exercise both paths).
"""

from __future__ import annotations

import os

from signeval._kernels import pure as _pure

if os.environ.get("SIGNEVAL_PURE"):
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from signeval._kernels import _fast as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

iou_matrix = _impl.iou_matrix
greedy_assign = _impl.greedy_assign
max_value_matching = _impl.max_value_matching


def available_backends() -> dict[str, object]:
    """Importable kernel modules keyed by backend name."""
    backends: dict[str, object] = {"pure": _pure}
    try:
        from signeval._kernels import _fast  # type: ignore[attr-defined]

        backends["compiled"] = _fast
    except ImportError:
        pass
    return backends
