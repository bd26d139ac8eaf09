"""Synthetic data, experiments, file formats and the command line."""
