"""Build script for the compiled Monte Carlo kernel.

The package works without the extension (a pure-numpy kernel is selected at
import time), so a failed compile only costs speed. Build in place with:

    python setup.py build_ext --inplace
"""

import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "cfmimo._mc._kernels_cy",
        ["src/cfmimo/_mc/_kernels_cy.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
