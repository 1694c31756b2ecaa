"""Kernel backend selection: compiled Cython core with pure numpy fallback.

The compiled module is preferred when importable; set the environment
variable QLOCAL_PURE_KERNELS=1 to force the fallback.  use_backend()
rebinds the exported functions at runtime (used by the benchmark and the
backend-equivalence tests).
"""

import os

from . import _pure

_BACKENDS = {"pure": _pure}

try:
    from . import _core

    _BACKENDS["compiled"] = _core
except ImportError:
    _core = None

_EXPORTED = ("kron_chain", "merge_mul", "term_apply", "pair_overlap")


def available_backends():
    return tuple(sorted(_BACKENDS))


def backend_name():
    return _ACTIVE.BACKEND


def use_backend(name):
    """Select the kernel implementation by name ('pure' or 'compiled')."""
    global _ACTIVE, kron_chain, merge_mul, term_apply, pair_overlap
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {available_backends()}")
    _ACTIVE = _BACKENDS[name]
    for fn in _EXPORTED:
        globals()[fn] = getattr(_ACTIVE, fn)
    return _ACTIVE


use_backend(
    "pure"
    if os.environ.get("QLOCAL_PURE_KERNELS") or "compiled" not in _BACKENDS
    else "compiled"
)
