"""Generative adversarial self-imitation on top of PPO, in plain numpy."""

__version__ = "0.1.0"
