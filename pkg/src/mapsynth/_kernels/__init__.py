"""Sweep-kernel backend selection.

The compiled Cython kernel is preferred when its extension built; the
numpy fallback is always available.  ``BACKEND`` names the one in use.
"""

from mapsynth._kernels import _pysweep

try:
    from mapsynth._kernels import _csweep

    sweep = _csweep.sweep
    BACKEND = "cython"
except ImportError:  # extension not built on this install
    _csweep = None
    sweep = _pysweep.sweep
    BACKEND = "python"


def available_backends() -> dict:
    """Name -> sweep callable, for tests and benchmarks."""
    backends = {"python": _pysweep.sweep}
    if _csweep is not None:
        backends["cython"] = _csweep.sweep
    return backends
