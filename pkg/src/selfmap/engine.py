"""Kernel engine selection.

The compiled extension is preferred when it imported cleanly; the
pure-numpy fallback is always available.  ``SELFMAP_ENGINE`` in the
environment (``compiled`` / ``python``) pins the choice globally, and every
call site accepts an explicit engine name that wins over both.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels
except ImportError:  # extension not built on this host
    _kernels = None

_BY_NAME = {"python": _kernels_py}
if _kernels is not None:
    _BY_NAME["compiled"] = _kernels


def available_engines() -> tuple[str, ...]:
    return tuple(sorted(_BY_NAME))


def resolve(name: str = "auto"):
    """Return the kernel module for ``name`` ('auto', 'compiled', 'python')."""
    if name == "auto":
        name = os.environ.get("SELFMAP_ENGINE", "auto")
    if name == "auto":
        name = "compiled" if _kernels is not None else "python"
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(
            f"unknown engine {name!r}; available: {', '.join(available_engines())}"
        ) from None


def active_name(name: str = "auto") -> str:
    return resolve(name).ENGINE_NAME
