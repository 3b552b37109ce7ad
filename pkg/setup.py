"""Build script for the compiled integration kernel.

The extension is optional: when Cython or a C compiler is missing the package
installs without it and falls back to the pure-Python stepper at import.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("PDAVD_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "pdavd._core",
                    ["src/pdavd/_core.pyx"],
                    include_dirs=[np.get_include(), "src/pdavd"],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
