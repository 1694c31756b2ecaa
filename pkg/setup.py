"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure numpy fallback is selected
at import time), so a failed extension build only costs speed.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "qlocal._kernels._core",
                ["src/qlocal/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - environment dependent
    sys.stderr.write(
        "qlocal: skipping compiled kernels (%s); using pure-python fallback\n" % exc
    )

setup(ext_modules=ext_modules)
