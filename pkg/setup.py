from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "emgdeck._kernels._split_cy",
                ["src/emgdeck/_kernels/_split_cy.pyx"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: the package still works on the pure-NumPy kernel backend.
    extensions = []

setup(ext_modules=extensions)
