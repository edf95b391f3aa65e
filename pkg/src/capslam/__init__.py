"""Magneto-visual dense surfel SLAM for simulated endoscopic capsule robots."""

__version__ = "0.1.0"
