import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

ext = Extension(
    "meshwalk.raster._kernels",
    ["src/meshwalk/raster/_kernels.pyx"],
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O3"],
)

setup(ext_modules=cythonize([ext], language_level=3))
