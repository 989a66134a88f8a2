"""Flood-impact pavement roughness analytics.

Batch toolkit covering the full workflow: ingest PMIS-style section-year
records and flood events, compute pre/post-flood deterioration
statistics, train six next-year-IRI regression models, and attribute
predictions with Shapley-value and local-surrogate explainers.
"""

__version__ = "0.1.0"

from . import dataset, deterioration, floods, lime, models, shapley, synth  # noqa: F401
