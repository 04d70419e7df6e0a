"""Fair QD-vs-MOO benchmarking on deceptive problems through a shared learned latent space."""

__version__ = "0.1.0"
