# gtn/metrics/__init__.py

"""Evaluation arithmetic: scores, RFS, perturbation sensitivity and sweeps."""
