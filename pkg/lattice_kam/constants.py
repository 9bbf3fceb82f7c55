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

from collections import OrderedDict

VERSION = '0.1.1'
LOGGER_NAME = 'lattice_kam'

WORKSPACE_PREFIX = 'lattice-kam-'
MANIFEST = 'manifest.json'
SUMMARY = 'summary.txt'
HYPOTHESES = 'hypotheses.json'
EXCLUSION = 'exclusion.json'
EXCLUSION_CSV = 'exclusion.csv'
KAM_REPORT = 'kam_report.json'
EPS_CSV = 'eps.csv'
BATCH_REPORT = 'batch_report.json'
BATCH_CSV = 'batch.csv'
HOMO_REPORT = 'homo_report.json'
APP_REPORT = 'app_report.json'
HESSIAN_CSV = 'hessian_blocks.csv'
H0_FIXTURE = 'h0_jet.json'
F_FIXTURE = 'f_jet.json'

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_EXCLUDED = 3
SUCCESS_CODES = [EXIT_OK]
ACCEPTED_STATUSES = ['converged', 'maxiter']

COMMANDS = [
    'check_hypotheses',
    'kam_run',
    'solve_homo',
    'app_demo',
    'measure_exclusion',
]

DEFAULTS = OrderedDict([
    ('eps', 1e-6),
    ('W_max', 8),
    ('K_max', 12),
    ('D_max', 4),
    ('J_max', 4),
    ('N', 3),
    ('seed', 0),
    ('tol', 1e-14),
    ('sigma0', 1.0),
    ('mu0', 1.0),
    ('s', 2.0),
    ('norm_beta', 0.25),
    ('beta', 0.0),
    ('hartree_width', 1.0),
    ('nonlinearity', None),
    ('kappa', None),
    ('kappas', [1e-3, 3e-3, 1e-2, 3e-2]),
    ('samples', 4096),
    ('rho', None),
    ('workers', 1),
])

DEFAULT_NONLINEARITY = {
    'KG_S2': 'u3',
    'QHO_R2': 'nls+',
}

# flag name -> config key
FLAG_KEYS = OrderedDict([
    ('eps', 'eps'),
    ('wmax', 'W_max'),
    ('kmax', 'K_max'),
    ('dmax', 'D_max'),
    ('jmax', 'J_max'),
    ('nmax', 'N'),
    ('seed', 'seed'),
    ('rho', 'rho'),
    ('kappa', 'kappa'),
    ('kappas', 'kappas'),
    ('samples', 'samples'),
    ('workers', 'workers'),
])
