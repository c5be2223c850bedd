import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "gkdv._kernels._stepper",
                ["src/gkdv/_kernels/_stepper.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: the package falls back to the pure-numpy kernels at import.
    ext_modules = []

setup(ext_modules=ext_modules)
