"""Off-policy evaluation diagnostics for tabular MDPs under Bellman incompleteness."""
__version__ = "0.1.0"
