"""Builds the optional compiled kernel extension.

The package works without it: ``tuplelearn._kernels`` falls back to the
pure-NumPy implementation when the extension is missing.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "tuplelearn._kernels._native",
                ["src/tuplelearn/_kernels/_native.pyx"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
