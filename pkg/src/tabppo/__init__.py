"""PPO-trained tabular transformer for imbalanced network intrusion detection."""

__version__ = "0.1.0"
