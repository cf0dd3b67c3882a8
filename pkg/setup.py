"""Build script: compiles the optional fast kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a missing compiler or Cython only costs performance.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; warn and continue otherwise."""

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
        sys.stderr.write(
            "warning: failed to build ddvkit fast kernels (%s); "
            "falling back to pure NumPy kernels\n" % exc
        )


def extensions():
    if os.environ.get("DDVKIT_SKIP_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        sys.stderr.write("warning: %s; building without fast kernels\n" % exc)
        return []
    ext = Extension(
        "ddvkit.runtime.kernels._fastcore",
        ["src/ddvkit/runtime/kernels/_fastcore.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-march=native"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
