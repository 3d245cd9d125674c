"""Stochastic FitzHugh-Nagumo neuron and its embedded leaky integrate-and-fire model."""

__version__ = "0.1.0"
