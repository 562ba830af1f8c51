"""Recovery-based linear finite elements for the Cahn-Hilliard equation."""

__version__ = "0.1.0"
