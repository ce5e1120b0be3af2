import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

ext_modules = cythonize(
    [
        Extension(
            "peerlearn.kt.kernels._sgd",
            ["src/peerlearn/kt/kernels/_sgd.pyx"],
            include_dirs=[numpy.get_include()],
        )
    ],
    language_level=3,
)

setup(ext_modules=ext_modules)
