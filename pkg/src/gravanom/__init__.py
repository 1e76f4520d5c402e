"""Chern-Simons functionals of Riemannian metrics on flat tori and their anomalies."""

__version__ = "0.1.0"
