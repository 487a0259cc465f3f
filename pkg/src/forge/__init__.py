"""forge: batch toolkit for LLM-assisted code migrations at desk scale."""

__version__ = "0.1.0"
