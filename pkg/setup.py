#!/usr/bin/env python3
"""
Setup script for the frbary package.
"""

from setuptools import setup, find_packages

# Read the content of README.md for the long description
with open("README.md", encoding="utf-8") as f:
    long_description = f.read()

setup(
    name="frbary",
    version="1.0.0",
    description="Exact Wasserstein barycenters of point clouds, histograms and densities by Fisher-Rao mirror descent",
    long_description=long_description,
    long_description_content_type="text/markdown",
    author="frbary Contributors",
    packages=find_packages(exclude=["tests"]),
    entry_points={
        "console_scripts": [
            "frbary=frbary.cli:main",
        ],
    },
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "POT>=0.9.1",
        "joblib>=1.2",
        "Pillow>=9.3",
        "chardet>=5.0.0",
    ],
    extras_require={
        "test": ["pytest>=7", "pytest-cov>=4", "mock>=5"],
    },
    python_requires=">=3.10",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Utilities",
    ],
    keywords="optimal transport, wasserstein barycenter, mirror descent, semi-discrete ot",
)
