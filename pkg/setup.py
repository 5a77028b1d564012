"""Build the optional Cython kernels.

The package is importable without them: ``scenopt._kernels`` falls back to a
numpy implementation when the extension is missing.

    python setup.py build_ext --inplace
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SCENOPT_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "scenopt._kernels._core",
                    ["src/scenopt/_kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )

setup(ext_modules=ext_modules)
