"""Multimodal churn-risk scoring at desk scale.

Three unimodal predictors (financial literacy, speech emotion, churn
propensity) are translated into a common indicator space and fused at
decision level into low/mid/high churn risk.
"""

__version__ = "0.1.0"
