"""Random walks perturbed by positive alpha-stable jumps at zero and their Feller Brownian limit."""

__version__ = "0.1.0"
