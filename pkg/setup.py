#!/usr/bin/env python

from setuptools import setup

import os
import re
import subprocess
import warnings

package_dir = 'consist'

# read the version without importing the package (its dependencies may be missing yet)
with open(os.path.join(package_dir, '__init__.py')) as fh:
    version = re.search(r'^__version__ = "([^"]+)"', fh.read(), re.M).group(1)

# convert the README and format in restructured text (only when registering)
long_desc = ""
if os.path.exists("README.md"):
    try:
        cmd = ['pandoc', '--from=markdown', '--to=rst', 'README.md']
        long_desc = subprocess.check_output(cmd).decode("utf8")
    except Exception as e:
        warnings.warn("Exception when converting the README format: %s" % e)

setup(name='pyconsist',
      version=version,
      description='Consistency checks for chess engines and forecasting models',
      long_description=long_desc,
      license='LGPLv3+',
      packages=['consist', ],
      package_dir={'consist': package_dir},
      package_data={'consist': ['data/*.yaml']},
      python_requires='>=3.8',
      install_requires=[
          'chess>=1.9',
          'numpy',
          'scipy',
          'PyYAML',
          'openai>=1.0',
          'backoff',
          'python-dotenv',
          'tqdm',
      ],
      entry_points={'console_scripts': ['pyconsist = consist.cli:main']},
      classifiers = [
            "Development Status :: 3 - Alpha",
            "Intended Audience :: Science/Research",
            "License :: OSI Approved :: GNU Lesser General Public License v3 (LGPLv3)",
            "Programming Language :: Python :: 3",
            "Operating System :: OS Independent",
            "Topic :: Games/Entertainment :: Board Games",
            "Topic :: Software Development :: Testing",
            "Topic :: Scientific/Engineering :: Artificial Intelligence",
      ],
      keywords=["chess", "uci", "metamorphic testing", "forecasting", "consistency"],
     )
