from distutils.core import Extension

from Cython.Build import cythonize


def build(setup_kwargs):
    cy_ext = cythonize(
        Extension(
            name="lptorus._ext",
            sources=["lptorus/_ext.pyx"],
            libraries=["m"],
        ),
    )
    setup_kwargs.update({"ext_modules": cy_ext})
