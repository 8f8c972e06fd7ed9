import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cflab.kernels._core",
                ["src/cflab/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # The pure-python kernels are selected at import time when the
    # compiled core is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)
