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
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

from os import path
import unittest

import numpy as np

from lattice_kam_sdk.jets import Jet
from lattice_kam_sdk.modes import model_from_dict, normal_clustering
from lattice_kam_sdk.series import FourierSeries, get_lattice

kg_model_dict = {
    'kind': 'KG_S2',
    'm': 1.0,
    'delta': 1.0,
    'n': 1,
    'admissible': [[1, 0]],
    'actions': [1.0],
}
kg_pair_dict = {
    'kind': 'KG_S2',
    'm': 1.0,
    'delta': 1.0,
    'n': 2,
    'admissible': [[1, 0], [2, 0]],
    'actions': [1.0, 1.5],
}
qho_model_dict = {
    'kind': 'QHO_R2',
    'n': 1,
    'admissible': [[1, 1]],
}
qho_pair_dict = {
    'kind': 'QHO_R2',
    'n': 2,
    'admissible': [[1, 1], [2, 1]],
    'actions': [1.0, 2.0],
}
kg_rho = [1.5]


class LatticeKamTestBase(unittest.TestCase):

    def setUp(self):
        super(LatticeKamTestBase, self).setUp()
        self.rng = np.random.default_rng(7)

    def tearDown(self):
        super(LatticeKamTestBase, self).tearDown()

    @property
    def cwd(self):
        return path.abspath(path.join(path.dirname(__file__), '..', '..'))

    @property
    def models_path(self):
        return path.join(self.cwd, 'models')

    @property
    def kg_model(self):
        return model_from_dict(kg_model_dict)

    @property
    def qho_model(self):
        return model_from_dict(qho_model_dict)

    def normal_set(self, model=None, w_max=2):
        return normal_clustering(model or self.kg_model, w_max)

    def random_series(self, lattice, value_shape=(), symmetric=False):
        shape = (len(lattice),) + tuple(value_shape)
        coeffs = self.rng.standard_normal(shape) + \
            1.0j * self.rng.standard_normal(shape)
        coeffs = coeffs * np.exp(-lattice.l1).reshape(
            (-1,) + (1,) * len(value_shape))
        if symmetric:
            coeffs = 0.5 * (coeffs + np.swapaxes(coeffs, 1, 2))
        return FourierSeries(lattice, coeffs).symmetrize()

    def random_jet(self, clustering, n=1, k_max=3, scale=1.0):
        """A real jet with decaying random coefficients."""
        lattice = get_lattice(n, k_max)
        dimension = clustering.dimension
        return Jet.from_components(
            clustering, lattice,
            theta=self.random_series(lattice) * scale,
            r=self.random_series(lattice, (n,)) * scale,
            zeta=self.random_series(lattice, (dimension,)) * scale,
            zetazeta=self.random_series(
                lattice, (dimension, dimension), symmetric=True) * scale)
