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

import hashlib
import json
import logging
import os
import shutil
from collections import OrderedDict
from contextlib import contextmanager
from tempfile import mkdtemp

import numpy as np
import scipy
import sympy
import yaml

from lattice_kam_sdk import DomainError, LatticeKamError, StreamToLogger
from lattice_kam_sdk.apps import KG_NONLINEARITIES, QHO_NONLINEARITIES
from lattice_kam_sdk.modes import KG_S2, MODEL_KINDS, model_from_dict
from lattice_kam_sdk.options import NormOptions, StepOptions, Truncation

from lattice_kam.constants import (
    DEFAULT_NONLINEARITY,
    DEFAULTS,
    MANIFEST,
    VERSION,
    WORKSPACE_PREFIX,
)

MODEL_KEYS = ['kind', 'm', 'delta', 'n', 'admissible', 'actions']


class ConfigError(LatticeKamError):
    """The scenario configuration is malformed or out of range."""

    pass


def load_model_file(path):
    """Read a YAML or JSON model description.

    :param path: The model file path.
    :return: dict.
    """
    if not path or not os.path.isfile(path):
        raise ConfigError('Model file {0} does not exist.'.format(path))
    with open(path, 'r') as infile:
        try:
            data = yaml.safe_load(infile)
        except yaml.YAMLError as e:
            raise ConfigError('Model file {0} is malformed: {1}'.format(
                path, e))
    if not isinstance(data, dict):
        raise ConfigError('Model file {0} does not hold a mapping.'.format(
            path))
    return data


def parse_floats(text):
    """'v1,v2,...' -> [v1, v2, ...]."""
    try:
        return [float(item) for item in text.split(',') if item.strip()]
    except (AttributeError, ValueError):
        raise ConfigError('Cannot read {0!r} as a list of numbers.'.format(
            text))


def parse_rho(text):
    """Parameter points, 'v1,v2' for one point, 'v1,v2;w1,w2' for a grid."""
    if text is None:
        return None
    if not isinstance(text, str):
        points = np.atleast_2d(np.asarray(text, dtype=float))
        return points.tolist()
    return [parse_floats(point) for point in text.split(';')
            if point.strip()]


def merge_config(model_data, overrides=None):
    """Defaults < model file < command line flags."""
    config = OrderedDict(DEFAULTS)
    config['model'] = OrderedDict()
    for key, value in (model_data or {}).items():
        if key in MODEL_KEYS:
            config['model'][key] = value
        elif key in DEFAULTS:
            config[key] = value
        else:
            raise ConfigError('Unknown model file key {0}.'.format(key))
    for key, value in (overrides or {}).items():
        if value is not None:
            config[key] = value
    if config['rho'] is not None:
        config['rho'] = parse_rho(config['rho'])
    if isinstance(config['kappas'], str):
        config['kappas'] = parse_floats(config['kappas'])
    return config


def _integer(config, key, low):
    value = config[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < low:
        raise ConfigError('{0} must be an integer >= {1}, got {2!r}.'.format(
            key, low, value))


def _number(config, key, low=None, high=None, strict=True):
    value = config[key]
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError('{0} must be a number, got {1!r}.'.format(
            key, value))
    if low is not None and (value <= low if strict else value < low):
        raise ConfigError('{0}={1} is below its range.'.format(key, value))
    if high is not None and (value >= high if strict else value > high):
        raise ConfigError('{0}={1} is above its range.'.format(key, value))
    config[key] = value


def validate_config(config):
    """Check every merged value and build the model.

    :return: SpectralModel.
    """
    kind = config['model'].get('kind')
    if kind not in MODEL_KINDS:
        raise ConfigError('Model kind must be one of {0}, got {1!r}.'.format(
            MODEL_KINDS, kind))
    for key, low in [('W_max', 2), ('K_max', 1), ('D_max', 2),
                     ('J_max', 0), ('N', 1), ('seed', 0), ('samples', 1),
                     ('workers', 1)]:
        _integer(config, key, low)
    _number(config, 'eps', 0.0, 1.0)
    _number(config, 'tol', 0.0)
    _number(config, 'sigma0', 0.0)
    _number(config, 'mu0', 0.0, 1.0, strict=False)
    _number(config, 's', 0.0)
    _number(config, 'norm_beta', 0.0, strict=False)
    _number(config, 'beta', 0.0, strict=False)
    _number(config, 'hartree_width', 0.0)
    if config['kappa'] is not None:
        _number(config, 'kappa', 0.0)
    try:
        kappas = [float(k) for k in config['kappas']]
    except (TypeError, ValueError):
        kappas = []
    config['kappas'] = kappas
    if not kappas or any(k <= 0 for k in kappas):
        raise ConfigError('kappas must be a list of positive numbers.')
    menu = KG_NONLINEARITIES if kind == KG_S2 else QHO_NONLINEARITIES
    if config['nonlinearity'] is None:
        config['nonlinearity'] = DEFAULT_NONLINEARITY[kind]
    if config['nonlinearity'] not in menu:
        raise ConfigError('Nonlinearity {0!r} is not one of {1}.'.format(
            config['nonlinearity'], list(menu)))
    try:
        model = model_from_dict(config['model'])
        for rho in config['rho'] or []:
            model.check_rho(rho)
    except (DomainError, TypeError, ValueError) as e:
        raise ConfigError('Invalid model: {0}'.format(e))
    return model


class Scenario(object):
    """One cli invocation: command, merged configuration and output
    directory.
    """

    def __init__(self, command, config, model, out, logger, model_path=None):
        self.command = command
        self.config = config
        self.model = model
        self.out = out
        self.logger = logger
        self.model_path = model_path
        self.files = []

    @property
    def seed(self):
        return self.config['seed']

    @property
    def truncation(self):
        return Truncation(self.config['W_max'], self.config['K_max'],
                          self.config['D_max'])

    @property
    def norm(self):
        return NormOptions(self.config['s'], self.config['norm_beta'])

    @property
    def step_options(self):
        return StepOptions(sigma0=self.config['sigma0'],
                           mu0=self.config['mu0'])

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)


def create_workspace(out=None):
    if out:
        if not os.path.isdir(out):
            os.makedirs(out)
        return out
    return mkdtemp(prefix=WORKSPACE_PREFIX)


def delete_workspace(path):
    if path and os.path.isdir(path):
        shutil.rmtree(path)


def _plain(value):
    if isinstance(value, dict):
        return OrderedDict((str(k), _plain(v)) for k, v in value.items())
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def write_json(path, data):
    with open(path, 'w') as outfile:
        json.dump(_plain(data), outfile, indent=2)
        outfile.write('\n')
    return path


def write_csv(path, header, rows):
    """Plot-ready table; floats in repr precision."""
    with open(path, 'w') as outfile:
        np.savetxt(outfile, np.asarray(rows, dtype=float).reshape(
            -1, len(header)), delimiter=',', header=','.join(header),
            comments='', fmt='%.17g')
    return path


def write_text(path, lines):
    with open(path, 'w') as outfile:
        outfile.write('\n'.join(lines) + '\n')
    return path


def config_hash(config):
    text = json.dumps(_plain(config), sort_keys=True)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def file_digest(path):
    with open(path, 'rb') as infile:
        return hashlib.sha256(infile.read()).hexdigest()


def versions():
    return OrderedDict([
        ('lattice-kam', VERSION),
        ('numpy', np.__version__),
        ('scipy', scipy.__version__),
        ('sympy', sympy.__version__),
        ('pyyaml', yaml.__version__),
    ])


def write_manifest(scenario):
    """Config hash, seed, versions and digests of the written files."""
    files = OrderedDict(
        (name, file_digest(os.path.join(scenario.out, name)))
        for name in sorted(set(scenario.files)))
    manifest = OrderedDict([
        ('command', scenario.command),
        ('config_hash', config_hash(scenario.config)),
        ('seed', scenario.seed),
        ('config', scenario.config),
        ('versions', versions()),
        ('files', files),
    ])
    return write_json(os.path.join(scenario.out, MANIFEST), manifest)


@contextmanager
def numpy_errors(logger):
    """Route numpy floating point warnings to the logger."""
    stream = StreamToLogger(logger, logging.WARNING)
    with np.errstate(all='log', call=stream):
        yield stream
