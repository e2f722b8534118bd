"""Build hooks for the optional compiled stepping kernels.

The package is fully functional without the extension; fluortraj._kernels
falls back to the pure-numpy implementation when the compiled module is
missing.  -ffp-contract=off keeps the C arithmetic bit-identical to the
numpy path (no FMA fusion), which the reproducibility tests rely on.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "fluortraj._kernels._compiled",
                ["src/fluortraj/_kernels/_compiled.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
