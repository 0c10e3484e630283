"""Synthetic scenes, simulated exploration, map projection and episodes."""
