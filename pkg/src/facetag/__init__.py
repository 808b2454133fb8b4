"""Experiment harness for face-act tagging of dyadic dialogs."""

__version__ = "0.1.0"
