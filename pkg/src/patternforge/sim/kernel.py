"""Kernel selection: the compiled loop when built, else the Python one."""

from __future__ import annotations

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

BACKENDS = ("c", "python")


def available() -> tuple:
    return BACKENDS if _ckernel is not None else ("python",)


def default_backend() -> str:
    return "c" if _ckernel is not None else "python"


def get(backend: str | None = None):
    backend = backend or default_backend()
    if backend == "c":
        if _ckernel is None:
            raise RuntimeError("compiled kernel is not built; reinstall the package with a C compiler")
        return _ckernel.run
    if backend == "python":
        return _pykernel.run
    raise ValueError(f"unknown kernel backend {backend!r}")
