from setuptools import setup, find_packages

with open("README.md", "r") as fh:
    long_description = fh.read()

setup(name='pyoblivious',
      version='0.0.1',
      description='Oblivious storage over a simulated key-value server, with cost and latency models',
      long_description=long_description,
      long_description_content_type="text/markdown",
      packages=find_packages(exclude=["tests"]),
      package_data={'pyoblivious': ['data/*.json']},
      include_package_data=True,
      install_requires=['scipy>=1.3.1',
                        'numpy>=1.17.1',
                        'numba>=0.46.0',
                        'graphviz>=0.13.2',
                        'pycryptodomex>=3.9.0'],
      extras_require={'tests': ['pytest>=6.0']},
      entry_points={'console_scripts': ['pyoblivious=pyoblivious.cli:main']},
      classifiers=(
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
      )
)
