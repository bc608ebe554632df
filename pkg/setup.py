"""Build script: compiles the optional fast-kernel extension.

The extension is a performance add-on; the package falls back to the pure
NumPy/Python kernels when the compiled module is absent, so any build
failure here downgrades to a warning instead of aborting the install.
"""

import sys

from setuptools import setup

ext_modules = []
cmdclass = {}

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension
    from setuptools.command.build_ext import build_ext

    class optional_build_ext(build_ext):
        def run(self):
            try:
                super().run()
            except Exception as exc:  # compiler missing, etc.
                print(f"warning: skipping compiled kernels ({exc})", file=sys.stderr)

        def build_extension(self, ext):
            try:
                super().build_extension(ext)
            except Exception as exc:
                print(f"warning: skipping {ext.name} ({exc})", file=sys.stderr)

    ext_modules = cythonize(
        [
            Extension(
                "signeval._kernels._fast",
                sources=["src/signeval/_kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
        },
    )
    cmdclass["build_ext"] = optional_build_ext
except ImportError as exc:
    print(f"warning: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass=cmdclass)
