from setuptools import find_packages, setup


extras = {}
extras["quality"] = ["black ~= 23.1", "ruff >= 0.0.241"]
extras["testing"] = ["pytest"] + extras["quality"]

setup(
    name="diffspline",
    version="0.0.1",
    license="Apache-2.0",
    description="Geodesics and Riemannian splines on the diffeomorphism group of the flat torus",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    install_requires=["numpy", "jax>=0.4.14", "pyyaml"],
    extras_require=extras,
    keywords="diffeomorphisms splines epdiff sobolev",
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    python_requires=">=3.9",
    entry_points={"console_scripts": ["diffspline = diffspline.cli:main"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Programming Language :: Python :: 3.9",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
