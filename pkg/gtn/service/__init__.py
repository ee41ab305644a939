# gtn/service/__init__.py

"""Process settings and experiment orchestration."""
