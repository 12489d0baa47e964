# Builds the optional Cython kernels. Without Cython (or a compiler) the
# package still installs and dpeval.kernels falls back to pure Python.
import os

from setuptools import setup

ext_modules = []
if os.environ.get("DPEVAL_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "dpeval._kernels",
                    ["src/dpeval/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
