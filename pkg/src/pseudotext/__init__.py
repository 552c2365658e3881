"""Entity pseudonymization toolkit: detect PII mentions, replace them with
knowledge-graph surrogates or enumerated placeholders, and measure what leaks."""

__version__ = "0.1.0"

from pseudotext.corpus import Document, EntityCategory, EntitySpan

__all__ = ["Document", "EntityCategory", "EntitySpan", "__version__"]
