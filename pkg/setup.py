"""Build script for the compiled clustering kernel.

The extension is optional: when no C toolchain is available the build
degrades to a warning and the package falls back to the pure-Python
kernel at import time (see crowdsense.clustering).
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

kernel = Extension(
    "crowdsense.clustering._kernel",
    sources=["src/crowdsense/clustering/_kernel.pyx"],
    include_dirs=[numpy.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    # -ffp-contract=off: the label kernel must evaluate the distance
    # predicate bit-identically to the pure-Python path; fused
    # multiply-adds would perturb the last ulp.
    extra_compile_args=["-O3", "-ffp-contract=off"],
)
kernel.optional = True

setup(
    ext_modules=cythonize([kernel], language_level=3),
)
