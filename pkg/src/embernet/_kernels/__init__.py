"""Kernel lane selection.

The hot loops live in ``_impl.py``. That module is loaded twice:

* ``pure``  — as written, executed by the interpreter (numpy-only lane)
* ``fast``  — every kernel wrapped in ``numba.njit(cache=True, nogil=True)``

``active`` points at the lane the library uses. The compiled lane is the
default whenever numba imports; set ``EMBERNET_NUMBA=0`` to force the
interpreted lane. Both lanes run the same statements, so results are
bit-identical; the benchmark in ``benchmarks/`` compares their speed.
"""

from __future__ import annotations

import importlib.util
import os
import pathlib
import sys

_IMPL_PATH = pathlib.Path(__file__).with_name("_impl.py")

_KERNEL_NAMES = [
    # helpers first purely for readability; numba resolves lazily
    "uf_root",
    "fen_build",
    "fen_add",
    "fen_descend",
    "component_roots",
    "local_move",
    "refine",
    "synth_fill",
]


def _load_impl(module_name: str, jit: bool):
    spec = importlib.util.spec_from_file_location(module_name, _IMPL_PATH)
    mod = importlib.util.module_from_spec(spec)
    # register before exec so numba's cache can resolve the module by name
    sys.modules[module_name] = mod
    spec.loader.exec_module(mod)
    if jit:
        from numba import njit

        for name in _KERNEL_NAMES:
            fn = njit(cache=True, nogil=True)(getattr(mod, name))
            setattr(mod, name, fn)
    return mod


pure = _load_impl("embernet._kernels._impl_pure", jit=False)

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

_flag = os.environ.get("EMBERNET_NUMBA", "").strip().lower()
NUMBA_ENABLED = HAVE_NUMBA and _flag not in ("0", "false", "off")

_fast = None


def get_fast():
    """Compiled lane, loaded on first use (requires numba)."""
    global _fast
    if _fast is None:
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed; compiled lane unavailable")
        _fast = _load_impl("embernet._kernels._impl_fast", jit=True)
    return _fast


active = get_fast() if NUMBA_ENABLED else pure


def lane_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
