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

import json
import math
import shutil
from os import path
from tempfile import mkdtemp

import yaml

from lattice_kam_sdk.tests import (
    LatticeKamTestBase,
    kg_model_dict,
    qho_model_dict,
)

KG_SCENARIO = dict(kg_model_dict, nonlinearity='u', W_max=2, K_max=4,
                   D_max=2, J_max=0, N=2)
QHO_SCENARIO = dict(qho_model_dict, nonlinearity='nls+', W_max=3, K_max=2,
                    D_max=4, N=1, samples=64, kappas=[0.1, 0.05])
# 2 omega meets lambda_1 + lambda_2 just below this parameter
NEAR_RESONANT_RHO = math.sqrt(21.0) / 2.0 - 0.5 + 1e-3


class RunnerTestBase(LatticeKamTestBase):

    def setUp(self):
        super(RunnerTestBase, self).setUp()
        self.tmp = mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
        super(RunnerTestBase, self).tearDown()

    def out(self, name='out'):
        return path.join(self.tmp, name)

    def write_model(self, data, name='model.yaml'):
        model_path = path.join(self.tmp, name)
        with open(model_path, 'w') as outfile:
            yaml.safe_dump(data, outfile)
        return model_path

    def read_json(self, *parts):
        with open(path.join(*parts), 'r') as infile:
            return json.load(infile)
