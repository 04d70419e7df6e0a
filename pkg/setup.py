import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fallback backend only
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("DIVBENCH_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "divbench._ckernels",
                ["src/divbench/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # keep IEEE semantics identical to the Python fallback: no fused
                # multiply-add, and no merging of sin/cos into sincos (glibc's
                # sincos can differ from separate calls in the last bit)
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-builtin-sin", "-fno-builtin-cos"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
