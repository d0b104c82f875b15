import os
import sys

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

if sys.platform == "win32":
    omp_compile, omp_link = ["/openmp"], []
elif sys.platform == "darwin":
    omp_compile, omp_link = [], []
else:
    omp_compile, omp_link = ["-fopenmp"], ["-fopenmp"]

if os.environ.get("MLEMBED_NO_OPENMP"):
    omp_compile, omp_link = [], []

ext = Extension(
    "mlembed._ckernels",
    ["src/mlembed/_ckernels.pyx"],
    include_dirs=[np.get_include(), "src/mlembed"],
    language="c++",
    extra_compile_args=["-O3", "-std=c++14"] + omp_compile,
    extra_link_args=omp_link,
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    # the package still works through the pure-Python kernels if this fails
    optional=True,
)

setup(ext_modules=cythonize([ext], language_level=3))
