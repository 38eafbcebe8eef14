from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="sspb",
    version="1.0.0",
    description="Self-supervised pretext task benchmark for melanoma image classification",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Topic :: Scientific/Engineering :: Image Recognition",
    ],
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.20.0",
        "scipy>=1.6.0",
        "Pillow>=8.0.0",
        "networkx>=2.5",
        "pydantic>=2.0.0",
        "psutil>=5.8.0",
    ],
    extras_require={
        "test": [
            "pytest>=6.0.0",
            "pytest-asyncio>=0.17.0",
            "pytest-cov",
        ],
        "dev": [
            "black",
            "isort",
            "mypy",
            "pytest-cov"
        ]
    },
    entry_points={
        "console_scripts": [
            "sspb=sspb.cli:main",
        ]
    },
    include_package_data=True,
)
