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

from collections import namedtuple

Truncation = namedtuple(
    'Truncation',
    [
        'w_max',
        'k_max',
        'd_max',
    ],
    defaults=(8, 12, 4)
)

NormOptions = namedtuple(
    'NormOptions',
    [
        's',
        'beta',
    ],
    defaults=(2.0, 0.25)
)

StepOptions = namedtuple(
    'StepOptions',
    [
        'sigma0',
        'mu0',
        'lie_terms',
        'lie_tol',
        'quadrature_nodes',
        'rk_steps',
        'tail_tol',
        'check_smallness',
    ],
    defaults=(1.0, 1.0, 40, 1e-16, 8, 64, 1e-6, True)
)
