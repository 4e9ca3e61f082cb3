"""Build script for the optional compiled replay kernels.

The package is pure Python except for ``tgaffinity._kernels._ckernels``,
a small Cython module holding the per-event inner loops. If Cython or a
C compiler is unavailable the build silently skips the extension and the
package falls back to the NumPy implementation at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/tgaffinity/_kernels/_ckernels.pyx",
        language_level="3",
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)
