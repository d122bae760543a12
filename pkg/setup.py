"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension: contractalloc.kernels
falls back to the NumPy implementation at import time if the compiled module
is missing. Building with Cython just makes the allocation inner loop faster.
"""

import sys

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "contractalloc._kernels_cy",
                ["src/contractalloc/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError as exc:
    print(f"contractalloc: skipping compiled kernels ({exc}); "
          "the pure-NumPy fallback will be used", file=sys.stderr)

setup(ext_modules=ext_modules)
