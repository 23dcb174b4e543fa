"""Limited-feedback performance and feedback partitioning for multi-tier cellular networks."""

__version__ = "0.1.0"
