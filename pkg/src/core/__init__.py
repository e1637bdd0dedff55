""" Core tkgqa module.

This module contains the temporal knowledge graph representation
(timestamps, facts, the immutable fact store) and the retrieval
plumbing built on it (verbalization, embedders, vector index).
"""

from .errors import *
from .timestamp import *
from .facts import *
from .verbalizer import *
from .embedders import *
from .retriever import *
