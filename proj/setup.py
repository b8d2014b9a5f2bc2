import glob
import os
import shutil
import subprocess
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = os.path.abspath(os.path.dirname(__file__))
        build_dir = os.path.join(self.build_temp, "cmake")
        os.makedirs(build_dir, exist_ok=True)
        subprocess.check_call(
            [
                "cmake",
                source_dir,
                "-DCMAKE_BUILD_TYPE=Release",
                f"-DPython_EXECUTABLE={sys.executable}",
            ],
            cwd=build_dir,
        )
        subprocess.check_call(
            ["cmake", "--build", build_dir, "--target", "_hner", "-j"]
        )
        produced = glob.glob(os.path.join(build_dir, "_hner*.so")) + glob.glob(
            os.path.join(build_dir, "_hner*.pyd")
        )
        if not produced:
            raise RuntimeError("cmake did not produce the _hner module")
        target = self.get_ext_fullpath(ext.name)
        os.makedirs(os.path.dirname(target), exist_ok=True)
        shutil.copy(produced[0], target)


setup(
    ext_modules=[CMakeExtension("hner._hner")],
    cmdclass={"build_ext": CMakeBuild},
)
