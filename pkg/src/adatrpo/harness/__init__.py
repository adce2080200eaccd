"""Generators, rate fitting, experiment orchestration and the command line."""
from .generators import generate_chain, generate_garnet
from .rates import DegenerateFitError, RateFit, fit_rate

__all__ = ["generate_chain", "generate_garnet", "fit_rate", "RateFit", "DegenerateFitError"]
