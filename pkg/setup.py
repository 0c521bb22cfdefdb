import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("ONSEG_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "onseg._kernels",
                    ["src/onseg/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except ImportError:
        # No Cython toolchain: install the pure NumPy backend only.
        ext_modules = []

setup(ext_modules=ext_modules)
