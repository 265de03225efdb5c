"""Multi-band RF energy harvesting and spectrum sensing for cognitive radio."""

from .kernels import BACKEND

__version__ = "0.1.0"

import logging as _logging

_logging.getLogger(__name__).addHandler(_logging.NullHandler())
