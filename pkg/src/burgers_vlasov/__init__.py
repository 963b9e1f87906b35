"""Vanishing-viscosity simulator for the 1D inviscid Burgers-Vlasov system."""

__version__ = "0.1.0"
