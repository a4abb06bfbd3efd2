"""Hearing loss compensation by Bayesian inference on a generative model.

The package derives a dynamic range compressor by message passing on a
factor graph, fits its tuning parameters from preferred input/output
examples, scores nested model variants with a Bayes factor, and keeps a
human in the loop through a binary-appraisal personalization agent.
"""

__version__ = "0.1.0"
