########
# Copyright (c) 2026 The lattice-kam Authors. All rights reserved
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#        http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
#    * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#    * See the License for the specific language governing permissions and
#    * limitations under the License.


from setuptools import setup

setup(
    name='lattice-kam',
    version='0.1.1',
    author='The lattice-kam Authors',
    description='KAM iteration for truncated Hamiltonian lattices.',
    packages=['lattice_kam', 'lattice_kam_sdk'],
    license='LICENSE',
    zip_safe=False,
    python_requires='>=3.7',
    install_requires=[
        "numpy>=1.17",
        "scipy>=1.3",
        "sympy>=1.5",
        "PyYAML>=5.1"
    ],
    entry_points={
        'console_scripts': [
            'lattice-kam=lattice_kam.cli:main',
        ],
    }
)
