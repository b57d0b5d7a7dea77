"""Build script. Compiles the fast per-example kernels when Cython is available.

The package works without the extension: prunekit._kernels falls back to the
NumPy implementation at import time.
"""

from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "prunekit._kernels.cykernels",
                ["src/prunekit/_kernels/cykernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
