"""Flexure-FET molecular-communication receiver model.

Competitive binding equilibrium, receptor binding noise, electromechanical
transduction, link metrics (SNR, symbol error probability), a stochastic
oracle for the binding statistics, and sweep/figure tooling.
"""
__version__ = "0.1.0"
