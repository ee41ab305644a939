# gtn/envs/__init__.py

"""Toy hierarchical shooter environments and their scripted policies."""
