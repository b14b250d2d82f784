import platform

from setuptools import Extension, setup

# hardware popcount; without it the builtin is a bit-twiddling loop
CFLAGS = ["-O3"] + (["-mpopcnt"] if platform.machine() in ("x86_64", "AMD64") else [])

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "binareye._ckernels",
                ["src/binareye/_ckernels.pyx"],
                extra_compile_args=CFLAGS,
                optional=True,
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
