"""Residual 3D pose estimation from 2D detections and depth."""
