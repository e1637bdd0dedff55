""" Command line module.

This module contains the run configuration and the pipeline stage
commands.
"""

from .config import *
from .main import *
