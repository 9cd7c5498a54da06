"""Build script: compiles the optional recurrent-kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set MOCAPTK_SKIP_EXT=1 to install pure-Python only.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MOCAPTK_SKIP_EXT"):
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "mocaptk.kernels._speedups",
                ["src/mocaptk/kernels/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
