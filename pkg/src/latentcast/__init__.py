"""latentcast: desk-scale benchmark for latent-space video forecasting.

A synthetic stochastic video world, small frozen encoders, lightweight task
readouts, a conditional latent diffusion forecaster with a regression
baseline, and a distributional evaluation suite, orchestrated by a
reproducible pipeline CLI.
"""

__version__ = "0.1.0"
