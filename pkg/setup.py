"""Build script for the optional compiled kernel core.

The extension accelerates the per-gate hot path (two-site gate application,
truncated SVD, QR shifts) by calling BLAS/LAPACK directly through scipy's
Cython bindings.  If the build fails for any reason the package still
installs and runs on the pure-numpy fallback in ``tnsim.kernels.pure``.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "tnsim.kernels._core",
        ["src/tnsim/kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
