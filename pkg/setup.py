from setuptools import setup, find_packages

setup(
    name="hpfold",
    version="0.1.0",
    description="Fold HP-model proteins on the square lattice with deep Q-learning",
    license="BSD-2-Clause",
    packages=find_packages(include=["hpfold*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.20.0",
        "gymnasium>=0.29.0",
        "pymupdf>=1.23.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0",
            "pytest-cov>=4.0",
            "black>=23.0",
            "ruff>=0.1.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "hpfold=hpfold.cli:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Bio-Informatics",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
)
