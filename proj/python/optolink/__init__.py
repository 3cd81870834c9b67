"""IMDD fiber link simulator with a delayed complex perceptron equalizer."""

from ._core import *  # noqa: F401,F403
from ._core import ParameterError, DegenerateSignalError, LinkSimulator  # noqa: F401

__version__ = "0.1.0"
