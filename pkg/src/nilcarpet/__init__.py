"""Fat nilpotent carpets, Kleinian groups built on them, and their stretch deformations."""

__version__ = "0.1.0"
