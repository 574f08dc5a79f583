"""Selects the arithmetic engine: compiled extension or pure Python.

The compiled core is a bit-for-bit twin of the pure implementation, so
the choice affects speed only.  STOCHFP_BACKEND=pure forces the pure
path; STOCHFP_BACKEND=compiled fails loudly if the extension is
missing; unset picks the extension when available.
"""

from __future__ import annotations

import os

_requested = os.environ.get("STOCHFP_BACKEND", "").strip().lower()
if _requested not in ("", "auto", "pure", "compiled"):
    raise ValueError(f"STOCHFP_BACKEND must be pure|compiled|auto, got {_requested!r}")

_core = None
if _requested != "pure":
    try:
        from . import _core as _core  # type: ignore[no-redef]
    except ImportError as exc:
        if _requested == "compiled":
            raise ImportError(f"compiled backend requested but unavailable: {exc}") from exc
        _core = None


def active_backend() -> str:
    """Name of the engine the process is using: 'compiled' or 'pure'."""
    return "pure" if _core is None else "compiled"


def core():
    """The extension module, or None when running pure."""
    return _core


def resolve(backend: str | None):
    """Map an explicit request ('pure' | 'compiled' | None for active)
    to the extension module or None; raises if 'compiled' is missing."""
    if backend is None or backend == "auto":
        return _core
    if backend == "pure":
        return None
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled backend not available in this build")
        return _core
    raise ValueError(f"unknown backend {backend!r}")
