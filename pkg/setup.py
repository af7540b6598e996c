from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/lmwishart/_kernels.pyx"],
        compiler_directives={"language_level": 3},
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        ext.name = "lmwishart._kernels"
except ImportError:
    # no Cython: the pure-Python kernel is used at import time
    pass

setup(ext_modules=ext_modules)
