"""Build script for the optional compiled simplex kernel.

The package works without the extension (a pure-Python twin of the pivot
loop is selected at import time), so Cython being absent just produces a
pure-Python install.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "lorot._simplex",
                ["src/lorot/_simplex.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
