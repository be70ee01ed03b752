"""Replicated software transactional memory with fine-grained leases and
cost-driven transaction migration, on a deterministic simulator."""

__version__ = "0.1.0"
