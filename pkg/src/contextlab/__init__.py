"""Contextual probability, Bell-type inequalities and hidden-variable simulations."""

__version__ = "0.1.0"
