"""Counterfactual data augmentation with active sampling and pairwise labeling."""

__version__ = "0.1.0"
