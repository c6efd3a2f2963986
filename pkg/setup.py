"""Build script for the compiled integration kernel.

The extension is optional: if Cython (or a C compiler) is unavailable the
package installs anyway and falls back to the pure-numpy kernel at import
time.  Build in place for development with

    python setup.py build_ext --inplace
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "blochensemble._kernels",
                ["src/blochensemble/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
