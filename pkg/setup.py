"""Build the optional compiled kernels; everything else is in pyproject.toml."""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MEMEXPLORER_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("memexplorer._kernels", ["src/memexplorer/_kernels.pyx"], extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
