"""Build script for the optional compiled kernel extension.

The extension is marked optional: if no compiler (or Cython) is available the
install still succeeds and the package falls back to the numpy kernels at
import time (see gmprune.backend).
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "gmprune._kernels_cy",
                ["src/gmprune/_kernels_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
