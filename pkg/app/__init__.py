"""
subspace-ae

Desk-scale autoencoder whose latent space is split by a learned mixing matrix
into independent per-part subspaces, trained and evaluated on procedural
face sprites with exact part masks.
"""

__version__ = "1.0.0"
