"""Binning calibration toolkit sources."""
