"""Build script: compiles the optional C extension holding the hot kernels.

If Cython (or a C compiler) is unavailable the package still installs and
falls back to the pure-numpy kernels in puncnorm._kernels.pure.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "puncnorm._kernels._core",
                ["src/puncnorm/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
