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

import logging


class StreamToLogger(object):
    """Write-only stream that forwards each non-blank line to a logger.

    Accepted by numpy as a floating point error sink (``numpy.seterrcall``
    or ``numpy.errstate(call=...)``).
    """
    def __init__(self, logger, log_level=logging.INFO):
        self.logger = logger
        self.log_level = log_level
        self.lines = 0

    def write(self, buf):
        for line in buf.splitlines():
            line = line.strip()
            if line:
                self.lines += 1
                self.logger.log(self.log_level, line)

    def read(self, size):
        msg = 'StreamToLogger is write-only, cannot read {0} bytes.'.format(
            size)
        self.logger.log(self.log_level, msg)
        raise IOError(msg)

    def flush(self):
        pass


class LatticeKamError(Exception):
    """Generic Error for handling issues building or iterating
    a truncated lattice Hamiltonian.
    """

    pass


class DomainError(LatticeKamError):
    """An argument is outside the domain of the operation."""

    pass


class ClusteringMismatch(LatticeKamError):
    """Operands live on different mode sets or frequency lattices."""

    pass


class EigenError(LatticeKamError):
    """Hermitian block eigensolver failure."""

    pass


class ZeroDivisorError(LatticeKamError):
    """A retained divisor of the homological equation is exactly zero."""

    pass


class SmallnessError(LatticeKamError):
    """A smallness condition on a generator or on the margins failed."""

    pass


class SeriesError(LatticeKamError):
    """A Lie series did not reach its tolerance within the term cap."""

    pass


class TailBudgetError(LatticeKamError):
    """Truncated Fourier or degree mass exceeded the allowed budget."""

    pass


class ExcludedError(LatticeKamError):
    """The current parameter value is excluded by a small divisor."""

    def __init__(self, message, audit=None):
        super(ExcludedError, self).__init__(message)
        self.audit = audit


class QuadratureError(LatticeKamError):
    """Two quadrature resolutions disagree."""

    pass


class InvariantError(LatticeKamError):
    """A checked bound or structural invariant does not hold."""

    pass
