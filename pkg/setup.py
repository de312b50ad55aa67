"""Build script for the optional compiled MinHash kernel.

The package works without the extension: newsxlt.minhash falls back to a
bit-identical numpy kernel when the compiled module is unavailable.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "newsxlt._minhash_cy",
                sources=["src/newsxlt/_minhash_cy.pyx"],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
