"""Desk-scale HD-map auto-labeling pipeline.

Point-cloud ingestion, 2.5D BEV tile rasterization, unified object
descriptors, knowledge-distillation label refinement, reference attention
kernels, and a confidence-routed human-in-the-loop review service.
"""

__version__ = "0.1.0"
