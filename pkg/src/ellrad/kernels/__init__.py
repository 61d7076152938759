"""Kernel backend selection.

The compiled extension holds the hot loops; a pure numpy implementation
with the same contracts serves as the fallback and reference.  The
active default is the compiled core when it imported cleanly, the numpy
backend otherwise; the ``ELLRAD_BACKEND`` environment variable or an
explicit ``backend=`` argument overrides the choice.
"""

import os

from ..errors import ConfigurationError
from . import numpy_backend

try:
    from . import _core
except ImportError:
    _core = None

HAVE_COMPILED = _core is not None


def available_backends():
    """Names of the importable backends, fallback first."""
    names = ["numpy"]
    if HAVE_COMPILED:
        names.append("cython")
    return tuple(names)


def default_backend():
    env = os.environ.get("ELLRAD_BACKEND", "").strip().lower()
    if env and env != "auto":
        return env
    return "cython" if HAVE_COMPILED else "numpy"


def get_backend(name=None):
    """Resolve a backend module by name (None or "auto" picks the default)."""
    if name is None or name == "auto":
        name = default_backend()
    if name == "numpy":
        return numpy_backend
    if name == "cython":
        if _core is None:
            raise ConfigurationError(
                "compiled kernel backend requested but the extension is not "
                "built; run `python setup.py build_ext --inplace` or install "
                "the package")
        return _core
    raise ConfigurationError(
        f"unknown kernel backend {name!r}; available: {available_backends()}")
