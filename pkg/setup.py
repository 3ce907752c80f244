import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled sampler is optional: the package falls back to the pure-Python
# implementation in hawkes_vb._pg_fallback when the extension is unavailable.
ext = Extension(
    "hawkes_vb._pg_core",
    ["src/hawkes_vb/_pg_core.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    optional=True,
)

setup(ext_modules=cythonize([ext], language_level=3) if cythonize else [])
