"""Build script: compiles the optional Cython event-loop kernel.

The package is fully functional without the extension (a pure-Python
kernel with identical draw-for-draw semantics is selected at import
time), so the extension is marked optional and any build failure
degrades to the pure install.
"""

import os

from setuptools import Extension, setup

ext_modules = []
try:
    if not os.path.exists("src/ssmp_lab/_kernel_cy.pyx"):
        raise ImportError("kernel source not present")
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "ssmp_lab._kernel_cy",
        sources=["src/ssmp_lab/_kernel_cy.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[os.path.join(os.path.dirname(np.__file__), "random", "lib")],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext.optional = True
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "embedsignature": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
