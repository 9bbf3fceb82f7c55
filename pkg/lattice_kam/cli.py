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

import argparse
import logging
import sys

from lattice_kam_sdk import ExcludedError, InvariantError, LatticeKamError

from lattice_kam import tasks
from lattice_kam.constants import (
    COMMANDS,
    EXIT_CONFIG,
    EXIT_EXCLUDED,
    EXIT_FAILED,
    FLAG_KEYS,
    LOGGER_NAME,
    VERSION,
)
from lattice_kam.utils import ConfigError

LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'


def _add_common(parser):
    parser.add_argument('--model', required=True,
                        help='YAML or JSON model description.')
    parser.add_argument('--eps', type=float, help='Perturbation size.')
    parser.add_argument('--wmax', type=int, help='Largest normal weight.')
    parser.add_argument('--kmax', type=int, help='Fourier cut-off K_max.')
    parser.add_argument('--dmax', type=int, help='Degree cap D_max.')
    parser.add_argument('--jmax', type=int, help='KAM step budget.')
    parser.add_argument('--nmax', type=int,
                        help='Divisor cut-off N for audits and solves.')
    parser.add_argument('--seed', type=int, help='Generator seed.')
    parser.add_argument('--rho',
                        help='"v1,v2" for one point, "v1,v2;w1,w2" for '
                             'a grid.')
    parser.add_argument('--kappa', type=float,
                        help='Divisor threshold of solve_homo.')
    parser.add_argument('--kappas', help='"k1,k2,..." threshold grid.')
    parser.add_argument('--samples', type=int, help='Monte-Carlo samples.')
    parser.add_argument('--workers', type=int,
                        help='Worker processes of a rho grid.')
    parser.add_argument('--out', help='Output directory.')
    parser.add_argument('--keep', action='store_true',
                        help='Keep the temporary workspace.')
    parser.add_argument('-v', '--verbose', action='count', default=0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='lattice-kam',
        description='KAM iteration for Hamiltonian lattices.')
    parser.add_argument('--version', action='version', version=VERSION)
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True
    for command in COMMANDS:
        _add_common(subparsers.add_parser(command))
    return parser


def configure_logging(verbose):
    level = max(logging.DEBUG, logging.WARNING - 10 * verbose)
    logging.basicConfig(level=level, format=LOG_FORMAT)
    return logging.getLogger(LOGGER_NAME)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logger = configure_logging(args.verbose)
    overrides = dict((key, getattr(args, flag))
                     for flag, key in FLAG_KEYS.items())
    command = getattr(tasks, 'cmd_{0}'.format(args.command))
    try:
        code, out = command(model_path=args.model,
                            overrides=overrides,
                            out=args.out,
                            keep=args.keep,
                            logger=logger)
    except ConfigError as e:
        logger.error('Configuration error: {0}'.format(e))
        return EXIT_CONFIG
    except ExcludedError as e:
        logger.error(str(e))
        return EXIT_EXCLUDED
    except InvariantError as e:
        logger.error('Check failed: {0}'.format(e))
        return EXIT_FAILED
    except LatticeKamError as e:
        logger.error('{0}: {1}'.format(type(e).__name__, e))
        return EXIT_FAILED
    if args.out or args.keep:
        logger.info('Reports written to {0}.'.format(out))
    return code


if __name__ == '__main__':
    sys.exit(main())
