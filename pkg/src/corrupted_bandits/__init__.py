"""Linear contextual bandits under adversarial reward corruption."""

__version__ = "0.1.0"
