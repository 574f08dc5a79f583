"""Build script: compiles the optional accelerator extension.

The extension is skipped (leaving the pure-Python implementation in
charge) when STOCHFP_NO_EXT=1 is set or when no working C toolchain is
available.  Floating-point semantics require strict IEEE behaviour, so
the compiler must not contract a*b+c into an FMA or reassociate
expressions; hence -ffp-contract=off and no -ffast-math.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, fall back to pure Python if not."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any toolchain failure is non-fatal
            print(f"warning: skipping accelerator extension build: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: skipping {ext.name}: {exc}")


ext_modules = []
if os.environ.get("STOCHFP_NO_EXT") != "1":
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "stochfp._core",
                sources=["src/stochfp/_core.pyx"],
                extra_compile_args=[
                    "-O3",
                    "-ffp-contract=off",
                    "-fexcess-precision=standard",
                ],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
