import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

setup(
    ext_modules=cythonize(
        [Extension("patternforge.sim._ckernel", ["src/patternforge/sim/_ckernel.pyx"],
                   include_dirs=[np.get_include()])],
        compiler_directives={"language_level": "3"},
    ),
)
