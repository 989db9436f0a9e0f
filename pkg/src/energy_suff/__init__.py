"""Energy-sufficiency control for robots that must return to a charging station."""

__version__ = "0.1.0"
