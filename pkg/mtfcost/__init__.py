"""
Move-to-Front Search-Cost Toolkit

Exact finite-n laws, large-list limiting densities, Monte-Carlo samplers
and LRU fault probabilities for the move-to-front list update rule.
"""

__version__ = "1.0.0"
