# gtn/core/__init__.py

"""Core domain models and utilities used across the GTN packages.

This package provides domain types, exceptions, constants and the
experiment configuration loader shared by the rest of the application.
"""
