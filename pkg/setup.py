from setuptools import setup

__about__ = {}

with open("completeness/__about__.py") as fp:
    exec(fp.read(), None, __about__)

setup(
    name="completeness",
    version=__about__["__version__"],
    description="Completeness benchmarks for behavioral prediction models",
    long_description=open("README.rst").read(),
    license="Apache v2",
    packages=["completeness", "completeness.models"],
    python_requires=">=3.8",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering",
    ],
    install_requires=[
        "numpy>=1.21",
        "scipy>=1.7",
        "pandas>=1.3",
        "scikit-learn>=1.0",
    ],
    entry_points={
        "console_scripts": ["completeness = completeness.cli:main"],
    },
)
