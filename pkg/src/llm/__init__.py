""" LLM access module.

This module contains the chat-completion gateway (scripted, cached and
live modes, response cache, transports) and the prompt templates.
"""

from .gateway import *
from .prompts import *
