"""Discrete-event simulation kernel, reference scenarios, trace conformance and code generation."""

__version__ = "0.1.0"
