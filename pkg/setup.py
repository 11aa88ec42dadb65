from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # no Cython: the pure-Python kernels are used at import time
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("saddlepoint._kernels", ["src/saddlepoint/_kernels.pyx"],
                   extra_compile_args=["-O3"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
