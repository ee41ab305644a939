# gtn/model/__init__.py

"""Model package: GTN topology, forward pass, noise hooks and checkpoints."""
