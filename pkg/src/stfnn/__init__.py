"""Spatio-temporal functional regression: functional neural networks with
geographic weighting and spatial autoregression, linear baselines,
simulation generators and a cross-validation harness."""

__version__ = "0.1.0"
