"""Kernel backend selection.

Imports the compiled Cython kernels when the extension was built, otherwise
falls back to the pure-Python implementations. Both expose the same four
entry points (kraus_c2, kraus_full, sde_c2, sde_full) consuming identical
pre-drawn random inputs, so results agree to floating-point noise; the
benchmark script in benchmarks/ compares their throughput.
"""
try:
    from ._kernels import kraus_c2, kraus_full, sde_c2, sde_full  # noqa: F401
    USING_COMPILED = True
except ImportError:  # extension not built: pure-Python fallback
    from ._kernels_py import kraus_c2, kraus_full, sde_c2, sde_full  # noqa: F401
    USING_COMPILED = False


def backend_name():
    return "cython" if USING_COMPILED else "python"
