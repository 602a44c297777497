"""Build script for the optional compiled kernel core.

The package works without the extension (pure-numpy fallback); building it
just makes the hot kernels available as afdcd._core.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "afdcd._core",
                ["src/afdcd/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
