"""Build script: compiles the optional Cython packet-decode kernel.

The package works without the extension (flowscape.fastpath falls back to a
pure-Python decoder), so a failed build only costs speed.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/flowscape/_kernel.pyx",
        compiler_directives={"language_level": 3},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"flowscape: skipping Cython kernel build ({exc}); pure-Python fallback will be used")

setup(ext_modules=ext_modules)
