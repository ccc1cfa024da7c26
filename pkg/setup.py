"""Build script: compiles the optional C kernel extension.

The package works without the extension (a pure-Python twin of every kernel
is bundled); if Cython or a C compiler is unavailable the build falls back
to pure Python with a warning instead of failing.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, otherwise continue without it."""

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
        print(
            f"warning: building the C kernels failed ({exc}); "
            "metaexp will use the pure-Python kernels",
            file=sys.stderr,
        )


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print(
            "warning: Cython not available; metaexp will use the "
            "pure-Python kernels",
            file=sys.stderr,
        )
        return []
    ext = Extension(
        "metaexp._kernels_c",
        sources=["src/metaexp/_kernels_c.pyx"],
        # -ffp-contract=off keeps float results bit-identical to the
        # pure-Python kernels (no fused multiply-add contraction).
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level="3")


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
