"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a NumPy/LAPACK
fallback is selected at import time), so any failure to compile is
downgraded to a warning instead of aborting the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

EXT_NAME = "gaussify._kernels._core"
PYX_SOURCE = "src/gaussify/_kernels/_core.pyx"
C_SOURCE = "src/gaussify/_kernels/_core.c"


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        ext = Extension(EXT_NAME, [C_SOURCE], extra_compile_args=["-O3"])
        return [ext]
    ext = Extension(EXT_NAME, [PYX_SOURCE], extra_compile_args=["-O3"])
    return cythonize([ext], compiler_directives={"language_level": "3"})


class OptionalBuildExt(build_ext):
    """Build the compiled kernels if possible, fall back silently otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler, broken toolchain, ...
            warnings.warn(
                "could not build the compiled kernels (%s); "
                "gaussify will use the pure NumPy backend" % exc
            )

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(
                "could not build %s (%s); "
                "gaussify will use the pure NumPy backend" % (ext.name, exc)
            )


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
