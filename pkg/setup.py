import numpy
from setuptools import setup

try:
    from Cython.Build import cythonize
    ext_modules = cythonize(
        "src/bubbleflow/_speedups.pyx",
        compiler_directives={"language_level": "3"},
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        ext.extra_compile_args = ["-O3"]
except ImportError:
    # Pure-python fallback is selected at import time if the extension is absent.
    ext_modules = []

setup(ext_modules=ext_modules)
