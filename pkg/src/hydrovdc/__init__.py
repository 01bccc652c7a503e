"""Newton-Euler modelling and virtual decomposition control of hydraulic parallel-serial manipulators."""

__version__ = "0.1.0"
