# gtn/trainer/__init__.py

"""Asynchronous multi-task actor-critic training of a shared GTN."""
