#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""The setup script."""

from setuptools import setup, find_packages

with open("README.rst") as readme_file:
    readme = readme_file.read()

with open("HISTORY.rst") as history_file:
    history = history_file.read()

requirements = [
    "numpy>=1.20",
    "scipy>=1.6",
    "pandas>=1.2",
    "matplotlib>=3.3",
    "tqdm>=4.42",
]

extras_requirements = {"logging": ["torch>=1.5", "tensorboard>=2.2"]}

setup_requirements = []

test_requirements = ["pytest"]

setup(
    author="OM_Lib developers",
    classifiers=[
        "Development Status :: 2 - Pre-Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Natural Language :: English",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    description="A virtual optomechanics experiment: cold damping of a mirror's acoustic mode",
    entry_points={"console_scripts": ["om_lib=OM_Lib.cli:main"]},
    extras_require=extras_requirements,
    install_requires=requirements,
    license="MIT license",
    long_description=readme + "\n\n" + history,
    include_package_data=True,
    keywords="OM_Lib optomechanics cold damping feedback cooling",
    name="OM_Lib",
    packages=find_packages(include=["OM_Lib", "OM_Lib.*"]),
    python_requires=">=3.9",
    setup_requires=setup_requirements,
    test_suite="tests",
    tests_require=test_requirements,
    version="0.1.0",
    zip_safe=False,
)
