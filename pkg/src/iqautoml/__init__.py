"""Hyperband-driven AutoML for multi-receiver I/Q technology classifiers.

Pipeline: synthesize labeled multi-receiver baseband I/Q datasets for three
coexisting OFDM-style technology classes, window them into CNN inputs, and
search a CNN architecture/learning/preprocessing space with Hyperband to find
near-optimal classifiers across SNR settings.
"""

__version__ = "0.1.0"
