import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "swingbus._kernels",
                ["src/swingbus/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        compiler_directives={"language_level": 3},
    )
else:
    # Pure-Python fallback kernels are selected at import time.
    extensions = []

setup(ext_modules=extensions)
