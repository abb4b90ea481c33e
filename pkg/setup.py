#!/usr/bin/env python

from setuptools import setup

setup(
    name="trnsense",
    version="0.1.0",
    description="Person tracking and activity recognition from mm-wave TRN channel estimates",
    packages=["trnsense"],
    package_dir={"": "src"},
    install_requires=["numpy", "scipy", "pandas", "pyyaml"],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["trnsense = trnsense.cli:main"]},
)
