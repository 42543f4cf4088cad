import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("EMOFUSE_PURE_PYTHON"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # fallback kernels are used at runtime
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "emofuse._core",
                    ["src/emofuse/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )

setup(ext_modules=ext_modules)
