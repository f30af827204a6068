import sys

import numpy as np
from setuptools import Extension, setup

# The compiled kernels are an optimization, not a requirement: the package
# falls back to the numpy implementations in treemapper._kernels.pure when
# the extension is missing (see treemapper/_kernels/__init__.py).
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "treemapper._kernels._ext",
                ["src/treemapper/_kernels/_ext.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"treemapper: skipping compiled kernels ({exc})", file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
