"""Build the optional Cython kernels.

The package works without them: ``mfl.kernels`` falls back to the numpy
implementation when the extension is missing.  Set ``MFL_NO_EXT=1`` to skip
the compile step entirely.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("MFL_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:  # pragma: no cover - build-time only
        print("Cython/numpy unavailable, installing pure-Python kernels only", file=sys.stderr)
    else:
        linux = sys.platform.startswith("linux")
        openmp = ["-fopenmp"] if linux else []
        # glibc's vector math library lets gcc vectorise the exp/tanh loops
        fast = ["-ffast-math"] if linux else []
        ext = Extension(
            "mfl._ckernels",
            ["src/mfl/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"] + fast + openmp,
            extra_link_args=openmp,
            libraries=["mvec", "m"] if linux else [],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize(
            [ext],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
