"""Builds the optional Cython split-search kernel.

The package works without the extension (a numpy fallback is selected at
import time), so any compilation failure downgrades to a pure-Python build
instead of aborting the install.
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
                "churnkit.forest._split_cy",
                ["src/churnkit/forest/_split_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - depends on the build host
    sys.stderr.write(f"skipping Cython extension ({exc}); using the numpy fallback\n")

setup(ext_modules=ext_modules)
