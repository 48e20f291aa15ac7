"""Build script: compiles the optional Cython convolution core.

The package is fully functional without the extension (a pure-numpy
backend is selected at import time), so any failure here downgrades to
a warning instead of breaking the install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "haznav.net.kernels._conv_cy",
                ["src/haznav/net/kernels/_conv_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    sys.stderr.write(
        "haznav: skipping Cython conv core (%s); "
        "the pure-numpy backend will be used\n" % exc
    )

setup(ext_modules=ext_modules)
