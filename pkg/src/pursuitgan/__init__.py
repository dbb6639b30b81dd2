"""Two-stage pursuit-evasion games with conditional-GAN pursuer policies."""

__version__ = "0.1.0"
