"""Certification toolkit for ReLU approximations of polytopic-system controllers."""

__version__ = "0.1.0"
