#!/usr/bin/env python
"""Kronecker-Hutchinson trace estimation from Kronecker-structured queries."""
import os.path
import re

from setuptools import find_packages, setup

HERE = os.path.abspath(os.path.dirname(__file__))


def read(*parts):
    with open(os.path.join(HERE, *parts), "r", encoding="utf-8") as fp:
        return fp.read()


# https://packaging.python.org/guides/single-sourcing-package-version/
def find_version(*file_paths):
    version_file = read(*file_paths)
    version_match = re.search(r"^__version__ = ['\"]([^'\"]*)['\"]", version_file, re.M)
    if version_match:
        return version_match.group(1)
    raise RuntimeError("Unable to find version string.")


setup(
    name="krontrace",
    version=find_version("src", "krontrace", "__init__.py"),
    description=__doc__,
    long_description=read("README.md"),
    long_description_content_type="text/markdown",
    packages=find_packages("src"),
    package_dir={"": "src"},
    package_data={
        "krontrace": ["data/*.yaml", "data/schema/*.json", "templates/*.txt"],
    },
    zip_safe=True,
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "Jinja2>=3.1.2",
        "jsonschema>=3.0.0,<=4.17.3",
        "PyYAML>=6.0.1",
        "colorama>=0.4.1",
    ],
    entry_points={"console_scripts": ["krontrace = krontrace.cli:main"]},
    license="Apache License 2.0",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Natural Language :: English",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    keywords="trace estimation Hutchinson Kronecker randomized linear algebra",
)
