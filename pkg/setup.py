#!usr/bin/env python

from setuptools import setup, find_packages
import os


with open(os.path.join('qcost', 'version.py')) as version_file:
    version = version_file.read().strip()

VERSION = version.split("=")[-1].replace("'", "")

setup(name='qcost',
	version=VERSION,
	description='Time-varying panel quantile cost functions with scope, scale and technical-change measures.',
	license='MIT',
	packages=find_packages(exclude=['tests']),
	install_requires=[
		'numpy>=1.20',
		'pandas>=1.2',
		'scipy>=1.7',
		'statsmodels>=0.12',
		'joblib>=1.0',
		'pyyaml>=5.1',
		'tqdm>=4.0'
  ],
	entry_points={'console_scripts': ['qcost=qcost.cli:main']},
	zip_safe=False,
	python_requires='>=3.8',
	classifiers=[
		'Development Status :: 3 - Alpha',
		'Intended Audience :: Science/Research',
		'Programming Language :: Python :: 3.8',
		'Programming Language :: Python :: 3.9',
		'Programming Language :: Python :: 3.10',
	]
	)
