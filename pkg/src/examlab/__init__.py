"""examlab: desk-scale orchestrator for ephemeral cloud exam environments."""

__version__ = "0.1.0"
