"""razewright: offline-testable retrieval-augmented generation, multi-role
proposal drafting, and evaluation tooling for structural-demolition text."""

__version__ = "0.1.0"
