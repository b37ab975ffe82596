"""Hot-kernel backend selection.

Prefers the compiled extension and falls back to the pure-NumPy module when
it is missing; set ``TUPLELEARN_PURE=1`` to force the fallback. Both
backends implement the same three functions: ``ranking_weights``,
``mi_from_samples`` and ``loss_and_grad``.
"""

import os

from . import fallback

_FORCE_PURE = os.environ.get("TUPLELEARN_PURE", "0") not in ("", "0")

if _FORCE_PURE:
    _impl = fallback
    HAVE_NATIVE = False
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        HAVE_NATIVE = True
    except ImportError:
        _impl = fallback
        HAVE_NATIVE = False

BACKEND = "native" if HAVE_NATIVE else "pure"

ranking_weights = _impl.ranking_weights
mi_from_samples = _impl.mi_from_samples
loss_and_grad = _impl.loss_and_grad


def available_backends() -> dict[str, object]:
    """Importable backend modules by name, for tests and benchmarks."""
    out: dict[str, object] = {"pure": fallback}
    try:
        from . import _native

        out["native"] = _native
    except ImportError:
        pass
    return out
