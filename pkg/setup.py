"""Build the optional compiled orbit kernels in place:

    python setup.py build_ext --inplace

The package works without this step; `renormpairs.kernels` falls back to
the pure-Python twin.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "renormpairs._kernels_cy",
                ["src/renormpairs/_kernels_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
