"""CMake-driven build of the mcal._mcal extension."""

import os
import subprocess
import sys
from pathlib import Path

import pybind11
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name, sourcedir=""):
        super().__init__(name, sources=[])
        self.sourcedir = os.fspath(Path(sourcedir).resolve())


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        ext_path = Path.cwd() / self.get_ext_fullpath(ext.name)
        extdir = ext_path.parent.resolve()
        cfg = "Debug" if self.debug else "Release"
        cmake_args = [
            f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={extdir}{os.sep}",
            f"-DPYTHON_EXECUTABLE={sys.executable}",
            f"-Dpybind11_DIR={pybind11.get_cmake_dir()}",
            f"-DCMAKE_BUILD_TYPE={cfg}",
            "-DMCAL_BUILD_PYTHON=ON",
            "-DMCAL_BUILD_CLI=OFF",
            "-DMCAL_BUILD_TESTS=OFF",
        ]
        build_temp = Path(self.build_temp) / ext.name
        build_temp.mkdir(parents=True, exist_ok=True)
        subprocess.run(["cmake", ext.sourcedir, *cmake_args],
                       cwd=build_temp, check=True)
        subprocess.run(["cmake", "--build", ".", "--parallel"],
                       cwd=build_temp, check=True)


setup(
    packages=["mcal"],
    package_dir={"": "python"},
    ext_modules=[CMakeExtension("mcal._mcal")],
    cmdclass={"build_ext": CMakeBuild},
    zip_safe=False,
)
