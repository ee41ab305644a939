# gtn/__init__.py

"""Generalization Tower Networks trained with asynchronous multi-task actor-critic."""

__version__ = "0.1.0"
