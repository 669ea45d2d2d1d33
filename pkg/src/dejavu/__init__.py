"""Conditional regenerative training for dense prediction.

Train a dense predictor (segmentation, depth, surface normals) alongside a
small regeneration module that must rebuild the original image from a
redacted copy plus the predictions. The regeneration loss only falls if the
predictions carry real structure, so it acts as an auxiliary supervision
signal on the base network.
"""

__version__ = "0.1.0"
