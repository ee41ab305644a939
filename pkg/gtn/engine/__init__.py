# gtn/engine/__init__.py

"""Engine package providing tensors, layers, reverse-mode gradients and RMSProp.

This package contains the minimal differentiable-computation layer that the
GTN model and the trainer are built on.
"""
