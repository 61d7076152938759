"""Build script for the optional compiled kernels.

The package is pure Python plus one Cython extension holding the hot
loops (shape evaluation, forward reduction, backprojection).  If the
extension cannot be built the install still succeeds and the package
falls back to the numpy kernels at import time.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"WARNING: compiled kernels not built ({exc}); "
              "falling back to the pure numpy backend")


try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("ellrad.kernels._core", ["src/ellrad/kernels/_core.pyx"])],
        language_level="3",
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
