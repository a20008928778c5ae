"""
Numerical Engine

Popularity laws and request profiles, limiting search-cost laws, the exact
finite-n oracle, Monte-Carlo samplers and the statistics that compare them.
"""
