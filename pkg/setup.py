import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the pure-numpy
# reference implementation at import time if the extension is absent.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "alphapotential.kernels._core",
                ["src/alphapotential/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
