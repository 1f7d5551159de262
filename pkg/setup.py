"""Build script for the optional compiled kernel extension.

The package is pure Python plus one Cython extension accelerating the
mode-ODE inner loop.  If Cython or a C compiler is unavailable the build
falls back to the pure-numpy kernels without failing the install.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"WARNING: compiled kernels skipped ({exc}); "
                  "pure-python backend will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "pure-python backend will be used")


ext_modules = []
cmdclass = {}
if os.environ.get("GBBMLAB_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext = Extension(
            "gbbmlab._kernels._fastcore",
            ["src/gbbmlab/_kernels/_fastcore.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize(
            [ext],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
        cmdclass["build_ext"] = optional_build_ext
    except ImportError:
        pass

setup(ext_modules=ext_modules, cmdclass=cmdclass)
