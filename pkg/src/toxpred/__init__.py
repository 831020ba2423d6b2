"""Toxicity prediction for user-subcommunity interactions.

Collaborative filtering over binary interaction labels: a logistic
matrix-factorization model predicts whether a user's future activity in
a subcommunity will be toxic, evaluated against non-personalized
baselines with imbalance-aware metrics.
"""

__version__ = "0.1.0"
