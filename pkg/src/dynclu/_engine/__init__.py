"""Simulation kernel backends.

The compiled Cython kernels are preferred when the extension was built;
otherwise the pure-numpy kernels take over.  ``DYNCLU_BACKEND`` in the
environment ('cython' or 'python') overrides the default, and callers can
force a backend per call.  Both backends implement the same three-kernel
interface and, for the skip-ahead engine, produce bit-identical series
from the same seed.
"""

import os

from ..errors import InvalidParameter
from . import _pykernels

try:
    from . import _cykernels

    HAVE_COMPILED = True
except ImportError:  # extension not built: fall back to numpy
    _cykernels = None
    HAVE_COMPILED = False


def default_backend_name() -> str:
    env = os.environ.get("DYNCLU_BACKEND")
    if env:
        return env
    return "cython" if HAVE_COMPILED else "python"


def get_backend(name=None):
    name = name or default_backend_name()
    if name == "cython":
        if not HAVE_COMPILED:
            raise InvalidParameter("compiled backend requested but not built")
        return _cykernels
    if name == "python":
        return _pykernels
    raise InvalidParameter(f"unknown backend {name!r}")
