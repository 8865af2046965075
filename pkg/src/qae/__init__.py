"""Quantum autoencoders for denoising quantum states."""

__version__ = "0.1.0"
