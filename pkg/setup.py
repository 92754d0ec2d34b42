from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
    import numpy as np

    ext_modules = cythonize(
        [
            Extension(
                "dynclu._engine._cykernels",
                ["src/dynclu/_engine/_cykernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    # No Cython at build time: install the pure-python backend only.
    ext_modules = []

setup(ext_modules=ext_modules)
