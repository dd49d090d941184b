"""Kernel backend selection.

The compiled extension is preferred; the pure-Python twin is used when the
extension is missing or when ``TRUNCSA_PURE_PY`` is set (any non-empty value).
``kernels`` is the module the rest of the package imports from; both backends
expose the same functions with identical numerical behaviour.
"""

import os

from . import pure

if os.environ.get("TRUNCSA_PURE_PY"):
    kernels = pure
else:
    try:
        from . import _core as kernels  # type: ignore[attr-defined]
    except ImportError:
        kernels = pure

BACKEND = kernels.BACKEND_NAME


def available_backends():
    """Importable backend modules keyed by name (used by tests/benchmarks)."""
    found = {"pure": pure}
    try:
        from . import _core

        found["compiled"] = _core
    except ImportError:
        pass
    return found
