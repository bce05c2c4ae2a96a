import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "mapsynth._kernels._csweep",
                ["src/mapsynth/_kernels/_csweep.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython available: the pure-Python kernel is used instead.
    extensions = []

setup(ext_modules=extensions)
