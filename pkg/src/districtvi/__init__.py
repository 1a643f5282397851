"""District vitality index engine.

Normalizes tabular urban features, clusters dissemination areas with
k-means tuned by a genetic algorithm (silhouette fitness), weights features
with a random forest over all feature subsets, and projects the numeric part
of the index per district with least squares.
"""

__version__ = "0.1.0"
