"""Hot kernels with import-time backend selection.

The compiled Cython extension is preferred when it built successfully;
otherwise the vectorized NumPy reference takes over.  Set the
environment variable OTSOURCE_PURE_PYTHON=1 to force the fallback (the
benchmark suite and the parity tests rely on both being importable).
"""

import os

from . import reference

COMPILED_AVAILABLE = False
compiled = None
try:
    from . import _paraboloid as compiled

    COMPILED_AVAILABLE = True
except ImportError:
    compiled = None

if COMPILED_AVAILABLE and not os.environ.get("OTSOURCE_PURE_PYTHON"):
    _impl = compiled
else:
    _impl = reference

BACKEND = _impl.BACKEND
project_paraboloid = _impl.project_paraboloid
