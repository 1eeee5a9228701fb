"""Pick the integrator kernel: compiled ``_dopri`` if built, else ``_dopri_py``.

Set ``DAMPHO_BACKEND=python`` to force the fallback.
"""

import os

from . import _dopri_py

kernel = _dopri_py
if os.environ.get("DAMPHO_BACKEND", "").lower() != "python":
    try:
        from . import _dopri as kernel  # noqa: F811
    except ImportError:  # extension not built
        pass

BACKEND = kernel.BACKEND


def available():
    """Names of the kernels importable in this environment."""
    names = ["python"]
    try:
        from . import _dopri  # noqa: F401
    except ImportError:
        return names
    return ["cython"] + names


def get(name):
    if name == "python":
        return _dopri_py
    if name == "cython":
        from . import _dopri
        return _dopri
    raise ValueError(f"unknown backend {name!r}")
