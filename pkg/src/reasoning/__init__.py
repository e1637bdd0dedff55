""" Reasoning module.

This module contains the question tree and its decomposer, the time
standardizer, the recursive solver and the answer aggregator.
"""

from .answer import *
from .tree import *
from .time_standardizer import *
from .decomposer import *
from .aggregator import *
from .solver import *
