""" Evaluation module.

This module contains answer matching, the Hits@k / Recall@n / tree
statistics metrics and the report tables.
"""

from .metrics import *
from .reports import *
from .dataset import *
