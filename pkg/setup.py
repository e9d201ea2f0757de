"""Build script for the optional compiled kernel core.

The package is fully functional without the extension (a pure-Python
implementation of every kernel ships alongside it); the extension only
accelerates the hot inner loops.  Build failures are therefore non-fatal.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "tristore.analytics._ckernels",
                ["src/tristore/analytics/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    for ext in extensions:
        ext.optional = True
except ImportError:
    extensions = []

setup(ext_modules=extensions)
